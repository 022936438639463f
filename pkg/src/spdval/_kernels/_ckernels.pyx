# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
from libc.math cimport exp, fabs, sqrt, M_PI


cdef inline Py_ssize_t _locate(const double[::1] breaks, double x) noexcept nogil:
    # index i with breaks[i] <= x < breaks[i+1], clamped to [0, m-1]
    cdef Py_ssize_t lo = 0, hi = breaks.shape[0] - 1, mid
    if x < breaks[0]:
        return 0
    if x >= breaks[hi]:
        return hi - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if breaks[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline double _falling(int p, int nu) noexcept nogil:
    cdef double out = 1.0
    cdef int r
    for r in range(nu):
        out *= p - r
    return out


cdef inline double _horner(const double[:, ::1] coef, Py_ssize_t i, double dx,
                           int nu) noexcept nogil:
    cdef int k = coef.shape[0] - 1
    cdef int j
    cdef double out = 0.0
    for j in range(k - nu + 1):
        out = out * dx + coef[j, i] * _falling(k - j, nu)
    return out


def ppoly_eval(breaks, coef, x, int nu=0):
    cdef const double[::1] b = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef const double[::1] xv = xa.reshape(-1)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n = xv.shape[0], p, i
    with nogil:
        for p in range(n):
            i = _locate(b, xv[p])
            ov[p] = _horner(c, i, xv[p] - b[i], nu)
    return out.reshape(shape)


def ppoly_inverse(breaks, coef, y):
    cdef const double[::1] b = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    shape = ya.shape
    cdef const double[::1] yv = ya.reshape(-1)
    cdef Py_ssize_t m = b.shape[0] - 1
    cdef Py_ssize_t n = yv.shape[0], p, i, lo_i, hi_i, mid_i
    cdef int k = c.shape[0] - 1, it
    vals = np.empty(m + 1, dtype=np.float64)
    cdef double[::1] v = vals
    for i in range(m):
        v[i] = c[k, i]
    v[m] = _horner(c, m - 1, b[m] - b[m - 1], 0)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double target, lo, hi, x, fx, dfx, step, width
    with nogil:
        for p in range(n):
            target = yv[p]
            if target <= v[0]:
                ov[p] = b[0]
                continue
            if target > v[m]:
                ov[p] = b[m]
                continue
            # first break with v >= target
            lo_i = 0
            hi_i = m
            while hi_i - lo_i > 1:
                mid_i = (lo_i + hi_i) >> 1
                if v[mid_i] >= target:
                    hi_i = mid_i
                else:
                    lo_i = mid_i
            i = lo_i
            width = b[i + 1] - b[i]
            lo = 0.0
            hi = width
            x = 0.5 * width
            for it in range(200):
                fx = _horner(c, i, x, 0)
                if fx >= target:
                    hi = x
                else:
                    lo = x
                if hi - lo <= 4e-16 * width:
                    x = hi
                    break
                dfx = _horner(c, i, x, 1)
                if dfx > 0.0:
                    step = x - (fx - target) / dfx
                    if step >= lo and step <= hi:
                        if fabs(step - x) <= 2e-16 * width:
                            x = step
                            break
                        x = step
                        continue
                x = 0.5 * (lo + hi)
            else:
                x = hi
            ov[p] = b[i] + x
    return out.reshape(shape)


def gauss_kde(samples, double bandwidth, x, double cutoff=8.0):
    cdef const double[::1] s = np.ascontiguousarray(samples, dtype=np.float64)
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef const double[::1] xv = xa.reshape(-1)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n = s.shape[0], m = xv.shape[0], p, j, lo, hi, mid
    cdef double reach = cutoff * bandwidth, acc, z, left
    cdef double norm = 1.0 / (n * bandwidth * sqrt(2.0 * M_PI))
    with nogil:
        for p in range(m):
            left = xv[p] - reach
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if s[mid] < left:
                    lo = mid + 1
                else:
                    hi = mid
            acc = 0.0
            j = lo
            while j < n:
                z = (xv[p] - s[j]) / bandwidth
                if z < -cutoff:
                    break
                acc += exp(-0.5 * z * z)
                j += 1
            ov[p] = acc * norm
    return out.reshape(shape)
