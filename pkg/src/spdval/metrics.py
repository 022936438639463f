"""Divergences between a physical law and a risk-neutral law.

Both metrics integrate over the union of the two support windows, clipped
to where both laws can be positive. Analytic laws are evaluated on their
untruncated density there, so truncation windows that differ between the
two laws do not bias the result. Mass outside the integration range larger
than ``EPS_OUTSIDE`` means the laws are not equivalent.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotEquivalent
from .quadrature import integrate

EPS_OUTSIDE = 1e-6
# both metrics are dimensionless; this absolute floor stops refinement near zero
ATOL = 1e-15


@dataclass(frozen=True)
class MeasurePair:
    p: object
    q: object
    common_support: tuple = None

    def __post_init__(self):
        if self.common_support is None:
            np_, nq = _natural(self.p), _natural(self.q)
            lo = max(min(self.p.support[0], self.q.support[0]), np_[0], nq[0])
            hi = min(max(self.p.support[1], self.q.support[1]), np_[1], nq[1])
            object.__setattr__(self, "common_support", (float(lo), float(hi)))
        lo, hi = self.common_support
        if not hi > lo:
            raise NotEquivalent("supports do not overlap")
        for name, d in (("p", self.p), ("q", self.q)):
            outside = float(d.cdf(np.array([lo]))[0] + d.sf(np.array([hi]))[0])
            if outside > EPS_OUTSIDE:
                raise NotEquivalent(f"{name} puts mass {outside:.3g} outside the common support")

    def breaks(self):
        lo, hi = self.common_support
        pts = np.concatenate([self.p.breakpoints, self.q.breakpoints, [lo, hi]])
        return np.unique(pts[(pts >= lo) & (pts <= hi)])


def _natural(d):
    return getattr(d, "natural_support", d.support)


def _extended_logpdf(d, x):
    if hasattr(d, "extended_logpdf"):
        return d.extended_logpdf(x)
    return d.logpdf(x)


def _log_densities(pair, x):
    with np.errstate(divide="ignore"):
        return _extended_logpdf(pair.p, x), _extended_logpdf(pair.q, x)


def _check_equivalence(pair):
    """Mass each law puts where the other density vanishes; must stay below ``EPS_OUTSIDE``."""

    def orphan(x):
        lp, lq = _log_densities(pair, x)
        p_only = np.isfinite(lp) & ~np.isfinite(lq)
        q_only = np.isfinite(lq) & ~np.isfinite(lp)
        return np.where(p_only, np.exp(lp), 0.0) + np.where(q_only, np.exp(lq), 0.0)

    mass = integrate(orphan, pair.breaks(), rtol=1e-6, atol=1e-12).value
    if mass > EPS_OUTSIDE:
        raise NotEquivalent(f"mass {mass:.3g} sits where only one of the densities is positive")


def relative_entropy(pair, standard=False, rtol=1e-11):
    """``int |log dP/dQ| dP``; ``standard=True`` drops the absolute value (Kullback-Leibler).

    Points where only one density is positive are excluded once their total
    mass is checked to be negligible.

    Raises:
        NotEquivalent: non-negligible mass where one density vanishes.
    """
    _check_equivalence(pair)

    def f(x):
        lp, lq = _log_densities(pair, x)
        both = np.isfinite(lp) & np.isfinite(lq)
        lp = np.where(both, lp, 0.0)
        lq = np.where(both, lq, 0.0)
        diff = lp - lq
        if not standard:
            diff = np.abs(diff)
        return np.where(both, np.exp(lp) * diff, 0.0)

    return max(integrate(f, pair.breaks(), rtol=rtol, atol=ATOL).value, 0.0)


def symmetric_distance(pair, rtol=1e-11):
    """``int |log p - log q| * (1/p + 1/q)^{-1} dm`` with the harmonic weight in log space."""
    _check_equivalence(pair)

    def f(x):
        lp, lq = _log_densities(pair, x)
        both = np.isfinite(lp) & np.isfinite(lq)
        lp = np.where(both, lp, 0.0)
        lq = np.where(both, lq, 0.0)
        weight = np.exp(lp + lq - np.logaddexp(lp, lq))
        return np.where(both, np.abs(lp - lq) * weight, 0.0)

    return integrate(f, pair.breaks(), rtol=rtol, atol=ATOL).value
