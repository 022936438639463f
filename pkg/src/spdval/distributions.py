"""One-dimensional distributions for cash flows and benchmark securities.

Every distribution lives on a finite support window. Analytic families with
unbounded support are truncated at their ``eps_tail`` quantiles and
renormalized; the discarded probability is kept in ``tail_mass``.

All objects are immutable after construction. CDF tables and interpolation
coefficients are built in ``__init__`` and never mutated afterwards.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels
from .errors import (
    ConfigError,
    NegativeDensity,
    NonNormalized,
    OutOfRange,
    TooFewSamples,
)
from .quadrature import integrate

log = logging.getLogger(__name__)

EPS_TAIL = 1e-8
EPS_NORM_ANALYTIC = 1e-8
EPS_NORM_GRID = 1e-4
EPS_ROOT = 1e-10
EPS_FSD = 1e-10


def _as_array(x):
    return np.asarray(x, dtype=float)


def _check_probability(u):
    u = _as_array(u)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise OutOfRange("probabilities must lie in [0, 1]")
    return u


def solve_monotone(func, target, lo, hi, deriv=None, xtol=EPS_ROOT, max_iter=200):
    """Vectorized ``inf{x in [lo, hi] : func(x) >= target}`` for nondecreasing ``func``.

    Safeguarded Newton steps are taken where ``deriv`` is supplied and
    positive; otherwise the bracket is bisected. ``xtol`` is relative to the
    bracket width.
    """
    target = _as_array(target)
    lo = np.broadcast_to(_as_array(lo), target.shape).astype(float).copy()
    hi = np.broadcast_to(_as_array(hi), target.shape).astype(float).copy()
    width0 = np.maximum(hi - lo, np.finfo(float).tiny)
    x = 0.5 * (lo + hi)
    active = np.ones(target.shape, dtype=bool)
    for _ in range(max_iter):
        fx = func(x)
        ge = fx >= target
        hi = np.where(active & ge, x, hi)
        lo = np.where(active & ~ge, x, lo)
        bisect = 0.5 * (lo + hi)
        nxt = bisect
        if deriv is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                d = deriv(x)
                newton = x - (fx - target) / d
            good = (d > 0) & np.isfinite(newton) & (newton >= lo) & (newton <= hi)
            converged = good & (np.abs(newton - x) <= 1e-15 * width0 + 1e-300)
            hi = np.where(active & converged, np.minimum(hi, newton), hi)
            active &= ~converged
            nxt = np.where(good, newton, bisect)
        active &= (hi - lo) > xtol * width0
        if not np.any(active):
            break
        x = np.where(active, nxt, x)
    return hi


class Distribution:
    """A probability law on a finite support window ``[lo, hi]``.

    Subclasses provide vectorized ``pdf``, ``cdf``, ``sf`` and ``quantile``.
    ``breakpoints`` seeds quadrature panels so that effort follows the mass.
    """

    kind = "abstract"
    support = (0.0, 1.0)
    tail_mass = 0.0
    degenerate = False

    def pdf(self, x):
        raise NotImplementedError

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, u):
        raise NotImplementedError

    def quantile_upper(self, s):
        """Quantile at upper-tail probability ``s``, i.e. ``quantile(1 - s)``."""
        return self.quantile(1.0 - _check_probability(s))

    def coupled(self, u, upper):
        """Quantile at ``u`` using the upper-tail form where ``upper`` is set.

        ``upper`` marks entries where ``u`` is actually an upper-tail
        probability; used to keep precision in the right tail.
        """
        u = _as_array(u)
        out = np.empty_like(u)
        if np.any(~upper):
            out[~upper] = self.quantile(u[~upper])
        if np.any(upper):
            out[upper] = self.quantile_upper(u[upper])
        return out

    @property
    def breakpoints(self):
        return self.quantile(np.linspace(0.0, 1.0, 33))

    def expect(self, payoff, rtol=1e-12, atol=1e-300):
        res = integrate(lambda x: payoff(x) * self.pdf(x), self.breakpoints, rtol=rtol, atol=atol)
        return res.value

    def mean(self):
        return self.expect(lambda x: x)

    def var(self):
        m = self.mean()
        return self.expect(lambda x: (x - m) ** 2)

    def std(self):
        return math.sqrt(max(self.var(), 0.0))

    def describe(self):
        return {"kind": self.kind, "support": list(self.support), "tail_mass": self.tail_mass}


class _TruncatedLaw(Distribution):
    """Renormalized restriction of an untruncated law to a finite window."""

    def __init__(self, natural_support, eps_tail=EPS_TAIL):
        nlo, nhi = natural_support
        lo = nlo if np.isfinite(nlo) else float(self._raw_ppf(np.array([eps_tail]))[0])
        hi = nhi if np.isfinite(nhi) else float(self._raw_isf(np.array([eps_tail]))[0])
        self.support = (float(lo), float(hi))
        self.natural_support = (float(nlo), float(nhi))
        self._fa = 0.0 if np.isfinite(nlo) else float(self._raw_cdf(np.array([lo]))[0])
        self._sb = 0.0 if np.isfinite(nhi) else float(self._raw_sf(np.array([hi]))[0])
        self._z = 1.0 - self._fa - self._sb
        self.tail_mass = self._fa + self._sb
        self.eps_tail = eps_tail
        self._median = float(self._raw_ppf(np.array([0.5]))[0])

    def _inside(self, x):
        return (x >= self.support[0]) & (x <= self.support[1])

    def pdf(self, x):
        x = _as_array(x)
        return np.where(self._inside(x), self._raw_pdf(x), 0.0) / self._z

    def logpdf(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore"):
            return np.where(self._inside(x), self._raw_logpdf(x), -np.inf) - math.log(self._z)

    def extended_logpdf(self, x):
        """Log density of the renormalized law continued past the truncation window."""
        x = _as_array(x)
        lo, hi = self.natural_support
        with np.errstate(divide="ignore"):
            return np.where((x >= lo) & (x <= hi), self._raw_logpdf(x), -np.inf) - math.log(self._z)

    def cdf(self, x):
        x = np.clip(_as_array(x), *self.support)
        low = (self._raw_cdf(x) - self._fa) / self._z
        high = 1.0 - (self._raw_sf(x) - self._sb) / self._z
        return np.clip(np.where(x <= self._median, low, high), 0.0, 1.0)

    def sf(self, x):
        x = np.clip(_as_array(x), *self.support)
        low = 1.0 - (self._raw_cdf(x) - self._fa) / self._z
        high = (self._raw_sf(x) - self._sb) / self._z
        return np.clip(np.where(x <= self._median, low, high), 0.0, 1.0)

    def quantile(self, u):
        u = _check_probability(u)
        with np.errstate(invalid="ignore"):
            low = self._raw_ppf(self._fa + u * self._z)
            high = self._raw_isf(self._sb + (1.0 - u) * self._z)
        out = np.where(u <= 0.5, low, high)
        out = np.where(u == 0.0, self.support[0], out)
        out = np.where(u == 1.0, self.support[1], out)
        return np.clip(out, *self.support)

    def quantile_upper(self, s):
        s = _check_probability(s)
        with np.errstate(invalid="ignore"):
            high = self._raw_isf(self._sb + s * self._z)
            low = self._raw_ppf(self._fa + (1.0 - s) * self._z)
        out = np.where(s <= 0.5, high, low)
        out = np.where(s == 0.0, self.support[1], out)
        out = np.where(s == 1.0, self.support[0], out)
        return np.clip(out, *self.support)


_FAMILIES = {
    "uniform": (("low", "high"), lambda p: stats.uniform(loc=p["low"], scale=p["high"] - p["low"])),
    "exponential": (("rate",), lambda p: stats.expon(scale=1.0 / p["rate"])),
    "normal": (("mean", "sd"), lambda p: stats.norm(loc=p["mean"], scale=p["sd"])),
    "lognormal": (("mu", "sigma"), lambda p: stats.lognorm(s=p["sigma"], scale=math.exp(p["mu"]))),
}


class AnalyticDistribution(_TruncatedLaw):
    """A named parametric family backed by :mod:`scipy.stats`.

    Families and parameters:
        ``uniform(low, high)``, ``exponential(rate)``, ``normal(mean, sd)``,
        ``lognormal(mu, sigma)`` with ``mu``/``sigma`` the log-scale parameters.
    """

    kind = "analytic"

    def __init__(self, family, eps_tail=EPS_TAIL, **params):
        if family not in _FAMILIES:
            raise ConfigError(f"unknown family {family!r}")
        names, build = _FAMILIES[family]
        missing = [n for n in names if n not in params]
        if missing:
            raise ConfigError(f"{family} requires parameters {missing}")
        params = {n: float(params[n]) for n in names}
        _validate_params(family, params)
        self.family = family
        self.params = params
        self._law = build(params)
        super().__init__(self._law.support(), eps_tail)

    def _raw_pdf(self, x):
        return self._law.pdf(x)

    def _raw_logpdf(self, x):
        return self._law.logpdf(x)

    def _raw_cdf(self, x):
        return self._law.cdf(x)

    def _raw_sf(self, x):
        return self._law.sf(x)

    def _raw_ppf(self, u):
        return self._law.ppf(u)

    def _raw_isf(self, s):
        return self._law.isf(s)

    def describe(self):
        out = super().describe()
        out.update(family=self.family, params=dict(self.params))
        return out

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"AnalyticDistribution({self.family!r}, {args})"


def _validate_params(family, p):
    bad = (
        (family == "uniform" and not p["high"] > p["low"])
        or (family == "exponential" and not p["rate"] > 0)
        or (family == "normal" and not p["sd"] > 0)
        or (family == "lognormal" and not p["sigma"] > 0)
    )
    if bad or not all(math.isfinite(v) for v in p.values()):
        raise ConfigError(f"invalid {family} parameters {p}")


class MixtureDistribution(_TruncatedLaw):
    """Finite mixture of analytic families; quantiles by bracketed root finding."""

    kind = "analytic"
    family = "mixture"

    def __init__(self, components, eps_tail=EPS_TAIL):
        if not components:
            raise ConfigError("mixture needs at least one component")
        weights = np.array([float(w) for w, _ in components])
        if np.any(weights <= 0):
            raise ConfigError("mixture weights must be positive")
        self.weights = weights / weights.sum()
        self.components = tuple(c for _, c in components)
        self._laws = [c._law for c in self.components]
        lo = min(law.support()[0] for law in self._laws)
        hi = max(law.support()[1] for law in self._laws)
        super().__init__((lo, hi), eps_tail)

    def _raw_pdf(self, x):
        return sum(w * law.pdf(x) for w, law in zip(self.weights, self._laws))

    def _raw_logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._raw_pdf(x))

    def _raw_cdf(self, x):
        return sum(w * law.cdf(x) for w, law in zip(self.weights, self._laws))

    def _raw_sf(self, x):
        return sum(w * law.sf(x) for w, law in zip(self.weights, self._laws))

    def _raw_ppf(self, u):
        u = _as_array(u)
        brackets = np.array([law.ppf(u) for law in self._laws])
        return solve_monotone(self._raw_cdf, u, brackets.min(axis=0), brackets.max(axis=0),
                              deriv=self._raw_pdf, xtol=1e-15)

    def _raw_isf(self, s):
        s = _as_array(s)
        brackets = np.array([law.isf(s) for law in self._laws])
        return solve_monotone(lambda x: -self._raw_sf(x), -s, brackets.min(axis=0),
                              brackets.max(axis=0), deriv=self._raw_pdf, xtol=1e-15)

    @property
    def params(self):
        return {"components": [
            {"weight": float(w), "family": c.family, "params": dict(c.params)}
            for w, c in zip(self.weights, self.components)
        ]}

    def describe(self):
        out = super().describe()
        out.update(family="mixture", params=self.params)
        return out


def _pchip_slopes(x, y):
    h = np.diff(x)
    delta = np.diff(y) / h
    n = x.size
    d = np.zeros(n)
    if n == 2:
        d[:] = delta[0]
        return d
    same = delta[:-1] * delta[1:] > 0
    w1 = 2 * h[1:] + h[:-1]
    w2 = h[1:] + 2 * h[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        harmonic = (w1 + w2) / (w1 / delta[:-1] + w2 / delta[1:])
    d[1:-1] = np.where(same, harmonic, 0.0)

    def end(h0, h1, d0, d1):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            return 3 * d0
        return s

    d[0] = end(h[0], h[1], delta[0], delta[1])
    d[-1] = end(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _hermite_coefficients(x, y, d):
    h = np.diff(x)
    delta = np.diff(y) / h
    c = np.empty((4, x.size - 1))
    c[0] = (d[:-1] + d[1:] - 2 * delta) / h**2
    c[1] = (3 * delta - 2 * d[:-1] - d[1:]) / h
    c[2] = d[:-1]
    c[3] = y[:-1]
    return c


def antiderivative(breaks, coef):
    """Coefficients of the continuous antiderivative vanishing at ``breaks[0]``."""
    k = coef.shape[0] - 1
    out = np.zeros((k + 2, coef.shape[1]))
    for j in range(k + 1):
        out[j] = coef[j] / (k - j + 1)
    h = np.diff(breaks)
    seg = np.zeros(coef.shape[1])
    for j in range(k + 1):
        seg = seg * h + out[j]
    seg = seg * h
    out[k + 1, 1:] = np.cumsum(seg)[:-1]
    return out


class GridDistribution(Distribution):
    """Density sampled on strictly increasing nodes, zero outside them.

    The density is interpolated monotone-cubically (Fritsch-Carlson) by
    default, which never undershoots the node values and so stays
    nonnegative. The CDF is the exact antiderivative of the interpolant.

    Raises:
        NegativeDensity: a node value is negative.
        NonNormalized: the interpolant integrates to more than ``eps_norm``
            away from one and ``normalize`` is false.
    """

    kind = "grid"

    def __init__(self, nodes, values, interpolation="monotone-cubic", eps_norm=EPS_NORM_GRID,
                 normalize=False):
        x = np.array(nodes, dtype=float)
        y = np.array(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ConfigError("grid needs matching 1-D nodes and values with at least two points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigError("grid contains non-finite entries")
        if np.any(np.diff(x) <= 0):
            raise ConfigError("grid nodes must be strictly increasing")
        if np.any(y < 0):
            raise NegativeDensity(f"negative density value {y.min():.6g} on grid")
        if interpolation == "monotone-cubic":
            coef = _hermite_coefficients(x, y, _pchip_slopes(x, y))
        elif interpolation == "linear":
            coef = np.vstack([np.diff(y) / np.diff(x), y[:-1]])
        else:
            raise ConfigError(f"unknown interpolation {interpolation!r}")
        cdf_coef = antiderivative(x, coef)
        total = float(_kernels.ppoly_eval(x, cdf_coef, x[-1:])[0])
        if not total > 0:
            raise NonNormalized("grid density integrates to zero")
        if not normalize and abs(total - 1.0) > eps_norm:
            raise NonNormalized(f"grid density integrates to {total:.10g}, not 1 (tolerance {eps_norm:g})")
        self.nodes = x
        self.values = y / total
        self.interpolation = interpolation
        self.normalization = total
        self._coef = coef / total
        self._cdf_coef = cdf_coef / total
        self.support = (float(x[0]), float(x[-1]))
        self.tail_mass = 0.0

    def pdf(self, x):
        x = _as_array(x)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        val = _kernels.ppoly_eval(self.nodes, self._coef, x)
        return np.where(inside, np.maximum(val, 0.0), 0.0)

    def cdf(self, x):
        x = np.clip(_as_array(x), *self.support)
        return np.clip(_kernels.ppoly_eval(self.nodes, self._cdf_coef, x), 0.0, 1.0)

    def quantile(self, u):
        u = _check_probability(u)
        out = _kernels.ppoly_inverse(self.nodes, self._cdf_coef, u)
        return np.where(u == 0.0, self.support[0], np.where(u == 1.0, self.support[1], out))

    @property
    def breakpoints(self):
        return self.nodes

    def describe(self):
        out = super().describe()
        out.update(interpolation=self.interpolation, nodes=int(self.nodes.size))
        return out


class DensityDistribution(Distribution):
    """Distribution from a vectorized density callable on a finite support.

    The CDF is tabulated at construction by adaptive quadrature on
    ``panels`` equal-width cells; in-between values use a 15-point Kronrod
    rule from the nearest table node.
    """

    kind = "density"

    def __init__(self, density, support, eps_norm=EPS_NORM_ANALYTIC, panels=128, normalize=False):
        lo, hi = (float(s) for s in support)
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ConfigError("density support must be a finite interval")
        nodes = np.linspace(lo, hi, panels + 1)
        probe = np.asarray(density(np.linspace(lo, hi, 16 * panels + 1)), dtype=float)
        if np.any(probe < 0):
            raise NegativeDensity(f"negative density value {probe.min():.6g}")
        cells = np.array([integrate(density, nodes[i:i + 2], rtol=1e-13, atol=1e-300).value
                          for i in range(panels)])
        total = cells.sum()
        if not total > 0:
            raise NonNormalized("density integrates to zero")
        if not normalize and abs(total - 1.0) > eps_norm:
            raise NonNormalized(f"density integrates to {total:.12g}, not 1 (tolerance {eps_norm:g})")
        self._density = density
        self._scale = 1.0 / total
        self._nodes = nodes
        self._table = np.concatenate([[0.0], np.cumsum(cells)]) / total
        self.support = (lo, hi)
        self.tail_mass = 0.0

    def pdf(self, x):
        x = _as_array(x)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        return np.where(inside, np.asarray(self._density(x), dtype=float) * self._scale, 0.0)

    def cdf(self, x):
        from .quadrature import _WK, _XK

        x = np.clip(_as_array(x), *self.support)
        flat = x.ravel()
        i = np.clip(np.searchsorted(self._nodes, flat, side="right") - 1, 0, self._nodes.size - 2)
        a = self._nodes[i]
        half = 0.5 * (flat - a)
        pts = (a + half)[:, None] + half[:, None] * _XK[None, :]
        part = half * (self.pdf(pts.ravel()).reshape(pts.shape) @ _WK)
        return np.clip(self._table[i] + part, 0.0, 1.0).reshape(x.shape)

    def quantile(self, u):
        u = _check_probability(u)
        j = np.clip(np.searchsorted(self._table, u, side="left"), 1, self._nodes.size - 1)
        out = solve_monotone(self.cdf, u, self._nodes[j - 1], self._nodes[j], deriv=self.pdf)
        return np.where(u == 0.0, self.support[0], np.where(u == 1.0, self.support[1], out))

    @property
    def breakpoints(self):
        return self._nodes


class AffineDistribution(Distribution):
    """Law of ``scale * X + shift`` for ``X ~ base`` and ``scale > 0``."""

    def __init__(self, base, scale=1.0, shift=0.0):
        from .errors import NonPositiveScale

        if not scale > 0:
            raise NonPositiveScale(f"scale must be positive, got {scale}")
        self.base = base
        self.scale = float(scale)
        self.shift = float(shift)
        self.kind = base.kind
        self.support = (self.shift + self.scale * base.support[0], self.shift + self.scale * base.support[1])
        self.tail_mass = base.tail_mass
        self.degenerate = base.degenerate

    def _to_base(self, x):
        return (_as_array(x) - self.shift) / self.scale

    def pdf(self, x):
        return self.base.pdf(self._to_base(x)) / self.scale

    def logpdf(self, x):
        return self.base.logpdf(self._to_base(x)) - math.log(self.scale)

    def cdf(self, x):
        return self.base.cdf(self._to_base(x))

    def sf(self, x):
        return self.base.sf(self._to_base(x))

    def quantile(self, u):
        return self.shift + self.scale * self.base.quantile(u)

    def quantile_upper(self, s):
        return self.shift + self.scale * self.base.quantile_upper(s)

    def mean(self):
        return self.shift + self.scale * self.base.mean()

    def var(self):
        return self.scale**2 * self.base.var()

    @property
    def breakpoints(self):
        return self.shift + self.scale * self.base.breakpoints

    def describe(self):
        return {"kind": "affine", "scale": self.scale, "shift": self.shift, "base": self.base.describe()}


class KernelDensity(GridDistribution):
    """Gaussian kernel estimate tabulated on a grid; see :func:`estimate_density_from_samples`."""

    kind = "grid"

    def __init__(self, nodes, values, bandwidth, n_samples, degenerate):
        super().__init__(nodes, values, normalize=True)
        self.bandwidth = bandwidth
        self.n_samples = n_samples
        self.degenerate = degenerate

    def describe(self):
        out = super().describe()
        out.update(bandwidth=self.bandwidth, n_samples=self.n_samples, degenerate=self.degenerate)
        return out


# --- operations -------------------------------------------------------------


def cdf_from_density(density, support=None, eps_norm=None, interpolation="monotone-cubic"):
    """Build a distribution with a populated CDF from a density description.

    ``density`` may be an existing :class:`Distribution` (validated and
    returned), a ``(nodes, values)`` pair of grid samples, or a vectorized
    callable together with a finite ``support``.
    """
    if isinstance(density, Distribution):
        total = integrate(density.pdf, density.breakpoints, rtol=1e-12).value
        tol = eps_norm if eps_norm is not None else (
            EPS_NORM_GRID if density.kind == "grid" else EPS_NORM_ANALYTIC)
        if abs(total - 1.0) > tol:
            raise NonNormalized(f"density integrates to {total:.12g}")
        return density
    if callable(density):
        if support is None:
            raise ConfigError("a callable density needs an explicit support")
        return DensityDistribution(density, support, eps_norm=eps_norm or EPS_NORM_ANALYTIC)
    nodes, values = density
    return GridDistribution(nodes, values, interpolation=interpolation,
                            eps_norm=eps_norm or EPS_NORM_GRID)


def quantile(d, u):
    """Left-continuous generalized inverse ``inf{x : F(x) >= u}``."""
    return d.quantile(u)


def expectation(d, payoff, rtol=1e-11, atol=None):
    """Integrate ``payoff`` against ``d`` by adaptive quadrature."""
    if atol is None:
        lo, hi = d.support
        atol = 1e-14 * max(abs(lo), abs(hi), 1.0)
    res = integrate(lambda x: np.asarray(payoff(x), dtype=float) * d.pdf(x), d.breakpoints,
                    rtol=rtol, atol=atol)
    return res.value


@dataclass(frozen=True)
class FsdReport:
    """``dominates`` is true when the second law dominates the first (``F_A >= F_B``)."""

    dominates: bool
    max_violation: float
    max_gap: float


def check_fsd(dA, dB, grid, eps=EPS_FSD):
    """Pointwise CDF comparison for first-order stochastic dominance of ``dB`` over ``dA``."""
    grid = _as_array(grid)
    fa = dA.cdf(grid)
    fb = dB.cdf(grid)
    violation = float(np.max(np.maximum(fb - fa, 0.0)))
    return FsdReport(
        dominates=bool(np.all(fa >= fb - eps)),
        max_violation=violation,
        max_gap=float(np.max(fa - fb)),
    )


def silverman_bandwidth(samples):
    samples = _as_array(samples)
    return 1.06 * float(np.std(samples, ddof=1)) * samples.size ** (-0.2)


def estimate_density_from_samples(samples, bandwidth="auto", grid_size=None):
    """Gaussian kernel density estimate on ``[min - 3h, max + 3h]``.

    The estimate is tabulated on a grid fine enough to resolve the kernel
    and renormalized over the window. Zero-variance samples get a tiny
    bandwidth and the result is flagged ``degenerate``.
    """
    x = np.sort(_as_array(samples).ravel())
    if x.size < 30:
        raise TooFewSamples(f"need at least 30 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("samples must be finite")
    degenerate = bool(x[-1] == x[0])
    if bandwidth == "auto" or bandwidth is None:
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ConfigError("bandwidth must be positive")
    if degenerate or not h > 0:
        h = 1e-6 * max(abs(x[0]), 1.0)
        degenerate = True
    lo, hi = x[0] - 3 * h, x[-1] + 3 * h
    if grid_size is None:
        grid_size = int(np.clip(math.ceil((hi - lo) / (h / 8)) + 1, 257, 8193))
    nodes = np.linspace(lo, hi, grid_size)
    values = _kernels.gauss_kde(x, h, nodes)
    return KernelDensity(nodes, values, bandwidth=h, n_samples=int(x.size), degenerate=degenerate)


def is_unimodal(d, points=2001, rel_tol=1e-9):
    """True when the density rises then falls on a grid spanning the support."""
    grid = np.unique(np.concatenate([
        np.linspace(*d.support, points),
        d.quantile(np.linspace(0.0, 1.0, points)),
    ]))
    f = d.pdf(grid)
    tol = rel_tol * float(f.max())
    diffs = np.diff(f)
    rising = diffs > tol
    falling = diffs < -tol
    if not np.any(falling):
        return True
    first_fall = int(np.argmax(falling))
    return not np.any(rising[first_fall:])


# --- loading ----------------------------------------------------------------


def from_config(config):
    """Build a distribution from ``{"family": ..., "params": {...}}``.

    Optional keys: ``eps_tail`` for truncation, and ``scale``/``shift`` to
    wrap the result in an affine transform.
    """
    if not isinstance(config, dict) or "family" not in config:
        raise ConfigError("distribution config needs a 'family' key")
    family = config["family"]
    params = config.get("params", {})
    eps_tail = float(config.get("eps_tail", EPS_TAIL))
    if family == "mixture":
        comps = params.get("components")
        if not comps:
            raise ConfigError("mixture config needs params.components")
        d = MixtureDistribution(
            [(c["weight"], AnalyticDistribution(c["family"], **c.get("params", {}))) for c in comps],
            eps_tail=eps_tail,
        )
    else:
        d = AnalyticDistribution(family, eps_tail=eps_tail, **params)
    if "scale" in config or "shift" in config:
        d = AffineDistribution(d, float(config.get("scale", 1.0)), float(config.get("shift", 0.0)))
    return d


def read_grid_csv(path):
    """Read a two-column ``x, phi`` CSV with a header row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 3:
        raise ConfigError(f"{path}: expected a header and at least two data rows")
    try:
        float(rows[0][0])
    except ValueError:
        pass
    else:
        raise ConfigError(f"{path}: header row required")
    try:
        data = np.array([[float(c) for c in r[:2]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed numeric row ({exc})") from exc
    return [h.strip() for h in rows[0][:2]], data


def load_distribution(path, interpolation="monotone-cubic"):
    """Load a grid CSV (``x, phi``) or an analytic JSON config."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return from_config(config)
    _, data = read_grid_csv(path)
    order = np.argsort(data[:, 0])
    return GridDistribution(data[order, 0], data[order, 1], interpolation=interpolation)


def warn_if_not_anchored(d, name="cash flow"):
    """Soft check that the support starts at zero; returns True when it does."""
    lo = d.support[0]
    if abs(lo) > 1e-12 * max(1.0, abs(d.support[1])):
        log.warning("%s support starts at %.6g, not 0", name, lo)
        return False
    return True
