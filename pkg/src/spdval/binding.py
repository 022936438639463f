"""Increasing quantile coupling between a cash-flow law and a benchmark law."""

import csv

import numpy as np

from .errors import TargetDensityVanishes

EPS_DEN = 1e-12


class BindingMap:
    """``K = F2^{-1} o F1`` transporting ``source`` onto ``target``.

    Upper-tail points go through survival functions and upper quantiles so
    that the map keeps relative precision where ``F1`` is close to one.
    """

    def __init__(self, source, target):
        self.source = source
        self.target = target

    def __call__(self, x):
        return self.map(x)

    def map(self, x):
        return _transport(self.source, self.target, x)

    def inverse(self, y):
        return _transport(self.target, self.source, y)

    def log_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.source.logpdf(x) - self.target.logpdf(self.map(x))

    def derivative(self, x):
        """``phi1(x) / phi2(K(x))``; ``inf`` where the target density vanishes."""
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(self.log_derivative(x))
        return np.where(np.isnan(out), 0.0, out)

    @property
    def boundary(self):
        """``(K(min supp phi1), min supp phi2)``; equal by construction."""
        return float(self.map(np.array([self.source.support[0]]))[0]), self.target.support[0]

    def sample(self, points=513):
        u = np.linspace(0.0, 1.0, points)
        x = self.source.coupled(np.minimum(u, 1.0 - u), u > 0.5)
        return x, self.map(x), self.derivative(x)

    def to_csv(self, path, points=513):
        x, k, kp = self.sample(points)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "K", "Kprime"])
            for row in zip(x, k, kp):
                w.writerow([repr(float(v)) for v in row])


def _transport(src, dst, x):
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x)
    lo_tail = np.asarray(src.cdf(flat), dtype=float)
    hi_tail = np.asarray(src.sf(flat), dtype=float)
    upper = lo_tail > 0.5
    out = dst.coupled(np.where(upper, hi_tail, lo_tail), upper)
    return out.reshape(x.shape)


def build_binding_map(phi1, phi2, eps_den=EPS_DEN, points=1025):
    """Quantile coupling of ``phi1`` onto ``phi2``.

    Densities are compared in dimensionless form (density times support
    width), so the ``eps_den`` threshold does not depend on units.

    Raises:
        TargetDensityVanishes: at an interior source quantile where the
            source density is non-negligible but the target density is not.
    """
    bm = BindingMap(phi1, phi2)
    u = np.linspace(0.0, 1.0, points)[1:-1]
    x = phi1.coupled(np.minimum(u, 1.0 - u), u > 0.5)
    k = bm.map(x)
    w1 = phi1.support[1] - phi1.support[0]
    w2 = phi2.support[1] - phi2.support[0]
    d1 = phi1.pdf(x) * w1
    d2 = phi2.pdf(k) * w2
    bad = (d2 < eps_den) & (d1 > eps_den)
    if np.any(bad):
        at = float(x[np.argmax(bad)])
        raise TargetDensityVanishes(
            f"benchmark density vanishes at K={float(k[np.argmax(bad)]):.6g} (cash flow level {at:.6g})")
    return bm


def verify_measure_preserving(bm, n_intervals=100):
    """Largest ``|Q(K(M)) - P(M)|`` over ``n_intervals`` equiprobable intervals."""
    u = np.linspace(0.0, 1.0, n_intervals + 1)
    upper = u > 0.5
    x = bm.source.coupled(np.where(upper, 1.0 - u, u), upper)
    k = bm.map(x)
    p = _interval_masses(bm.source, x)
    q = _interval_masses(bm.target, k)
    return float(np.max(np.abs(q - p)))


def _interval_masses(d, pts):
    # lower half via the cdf, upper half via the survival function
    c = d.cdf(pts)
    s = d.sf(pts)
    lower = np.diff(c)
    upper = -np.diff(s)
    return np.where(c[1:] > 0.5, upper, lower)


def derivative_consistency(bm, grid, rel_step=1e-5):
    """Max relative gap between ``K'`` and central differences of ``K``."""
    grid = np.asarray(grid, dtype=float)
    lo, hi = bm.source.support
    width = hi - lo
    h = rel_step * np.maximum(np.abs(grid), width * 1e-2)
    inside = (grid - h > lo) & (grid + h < hi)
    x, h = grid[inside], h[inside]
    if x.size == 0:
        return 0.0
    fd = (bm.map(x + h) - bm.map(x - h)) / (2.0 * h)
    exact = bm.derivative(x)
    ok = np.isfinite(exact) & (exact > 0)
    return float(np.max(np.abs(fd[ok] - exact[ok]) / exact[ok])) if np.any(ok) else 0.0
