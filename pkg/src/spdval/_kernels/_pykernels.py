"""Pure numpy implementations of the numerical kernels.

These mirror :mod:`spdval._kernels._ckernels` one for one and are used when
the compiled extension is unavailable or ``SPDVAL_PURE_PYTHON=1`` is set.

Piecewise polynomials use the local power basis in descending order:
``coef[j, i]`` multiplies ``(x - breaks[i]) ** (k - j)`` on piece ``i``,
where ``k = coef.shape[0] - 1``.
"""

import math

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _falling(p, nu):
    out = 1.0
    for r in range(nu):
        out *= p - r
    return out


def ppoly_eval(breaks, coef, x, nu=0):
    """Evaluate the ``nu``-th derivative of a piecewise polynomial.

    Points outside ``[breaks[0], breaks[-1]]`` are evaluated on the nearest
    end piece; callers handle extrapolation policy.
    """
    breaks = np.ascontiguousarray(breaks, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    m = breaks.size - 1
    k = coef.shape[0] - 1
    idx = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, m - 1)
    dx = x - breaks[idx]
    out = np.zeros_like(dx)
    for j in range(k - nu + 1):
        out = out * dx + coef[j, idx] * _falling(k - j, nu)
    return out


def _break_values(breaks, coef):
    m = breaks.size - 1
    k = coef.shape[0] - 1
    v = np.empty(m + 1)
    v[:m] = coef[k, :]
    h = breaks[m] - breaks[m - 1]
    last = 0.0
    for j in range(k + 1):
        last = last * h + coef[j, m - 1]
    v[m] = last
    return v


def ppoly_inverse(breaks, coef, y):
    """Left-continuous inverse ``inf{x : p(x) >= y}`` of a nondecreasing ppoly.

    Targets below ``p(breaks[0])`` map to ``breaks[0]`` and targets above
    ``p(breaks[-1])`` map to ``breaks[-1]``.
    """
    breaks = np.ascontiguousarray(breaks, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    m = breaks.size - 1
    k = coef.shape[0] - 1
    v = _break_values(breaks, coef)
    out = np.empty_like(y)
    low = y <= v[0]
    high = y > v[m]
    out[low] = breaks[0]
    out[high] = breaks[m]
    inner = ~(low | high)
    if not np.any(inner):
        return out
    yi = y[inner]
    piece = np.searchsorted(v, yi, side="left") - 1
    piece = np.clip(piece, 0, m - 1)
    lo = np.zeros_like(yi)
    hi = breaks[piece + 1] - breaks[piece]
    c = coef[:, piece]
    # bisection on the predicate p(x) >= y keeps the leftmost crossing
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        val = np.zeros_like(mid)
        for j in range(k + 1):
            val = val * mid + c[j]
        ge = val >= yi
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    out[inner] = breaks[piece] + hi
    return out


def gauss_kde(samples, bandwidth, x, cutoff=8.0):
    """Gaussian kernel density estimate at ``x`` from sorted ``samples``."""
    samples = np.ascontiguousarray(samples, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    n = samples.size
    out = np.empty_like(x)
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        z = (xs[:, None] - samples[None, :]) / bandwidth
        w = np.where(np.abs(z) <= cutoff, np.exp(-0.5 * z * z), 0.0)
        out[start:start + chunk] = w.sum(axis=1)
    return out / (n * bandwidth * _SQRT_2PI)
