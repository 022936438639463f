"""Value a cash flow by the continuous Arrow-Debreu portfolio that replicates its law.

The closed-form value is ``int x * q(K(x)) * K'(x) dx`` over the cash-flow
support, with ``K`` the quantile coupling onto the benchmark and
``K' = phi1 / (phi2 o K)``. The finite version buys cash-or-nothing spreads
on ``n`` equiprobable intervals and converges to it.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .binding import build_binding_map, verify_measure_preserving
from .distributions import AffineDistribution, is_unimodal
from .errors import (
    ConfigError,
    DomainNotCovered,
    NotUnimodal,
    UnboundedQ,
    ZeroVariance,
)
from .portfolio import SignedMeasure, integrate_measure, total_variation
from .quadrature import integrate

log = logging.getLogger(__name__)

EPS_QUAD = 1e-10
COVERAGE_TOL = 1e-6


@dataclass
class ValuationInputs:
    """Cash-flow law ``phi1``, benchmark law ``phi2`` and state prices ``spd``."""

    phi1: object
    phi2: object
    spd: object
    ctx: object = None
    _binding: object = field(default=None, init=False, repr=False)

    @property
    def binding(self):
        if self._binding is None:
            self._binding = build_binding_map(self.phi1, self.phi2)
        return self._binding

    @property
    def bond_price(self):
        return self.ctx.bond_price if self.ctx is not None else self.spd.bond_price

    def with_cash_flow(self, phi1):
        return ValuationInputs(phi1, self.phi2, self.spd, self.ctx)

    def check_coverage(self, tol=COVERAGE_TOL):
        """Benchmark mass outside the SPD domain must stay below ``tol``."""
        lo, hi = self.spd.domain
        below = float(self.phi2.cdf(np.array([lo]))[0]) if self.phi2.support[0] < lo else 0.0
        above = float(self.phi2.sf(np.array([hi]))[0]) if self.phi2.support[1] > hi else 0.0
        if below + above > tol:
            raise DomainNotCovered(
                f"benchmark puts mass {below + above:.3g} outside the state-price domain "
                f"[{lo:.6g}, {hi:.6g}]")
        return below + above


@dataclass
class ValuationReport:
    value: float
    method: str
    n: int = None
    portfolio: SignedMeasure = None
    diagnostics: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_dict(self, portfolio_ref=None):
        out = {"value": self.value, "method": self.method, "n": self.n,
               "diagnostics": dict(self.diagnostics), "errors": list(self.errors)}
        if portfolio_ref is not None:
            out["portfolio_ref"] = portfolio_ref
        return out


def _value_breaks(inputs, panels=64):
    phi1 = inputs.phi1
    u = np.linspace(0.0, 1.0, panels + 1)
    x = phi1.coupled(np.minimum(u, 1.0 - u), u > 0.5)
    lo, hi = phi1.support
    # strikes where the SPD has kinks, pulled back to cash-flow levels
    kinks = np.asarray(inputs.spd.breakpoints, dtype=float)
    t_lo, t_hi = inputs.phi2.support
    kinks = kinks[(kinks > t_lo) & (kinks < t_hi)]
    pulled = inputs.binding.inverse(kinks) if kinks.size else np.array([])
    pts = np.concatenate([x, phi1.breakpoints, pulled, [lo, hi]])
    return np.unique(pts[(pts >= lo) & (pts <= hi)])


def integrand(inputs, x):
    """``x * q(K(x)) * K'(x)`` with the density ratio taken in log space."""
    x = np.asarray(x, dtype=float)
    bm = inputs.binding
    k = bm.map(x)
    qk = inputs.spd(k)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logw = np.log(qk) + bm.log_derivative(x)
        val = x * np.exp(logw)
    return np.where(np.isfinite(val) & (qk > 0), val, 0.0)


def value_closed_form(inputs, rtol=EPS_QUAD, with_portfolio=True):
    """Closed-form value of the replicating Arrow-Debreu portfolio.

    Raises:
        TargetDensityVanishes: from the binding map.
        DomainNotCovered: the SPD does not cover the image of the cash-flow support.
        DivergentIntegral: the quadrature does not converge.
    """
    uncovered = inputs.check_coverage()
    breaks = _value_breaks(inputs)
    res = integrate(lambda x: integrand(inputs, x), breaks, rtol=rtol, atol=1e-300)
    diagnostics = {
        "tail_mass": float(inputs.phi1.tail_mass),
        "uncovered_benchmark_mass": uncovered,
        "quadrature_error": res.error,
        "quadrature_panels": res.panels,
        "measure_preservation": verify_measure_preserving(inputs.binding, 64),
    }
    portfolio = build_ad_portfolio(inputs) if with_portfolio else None
    if portfolio is not None:
        diagnostics["portfolio_total_variation"] = total_variation(portfolio, rtol=1e-9, atol=1e-300)
    return ValuationReport(res.value, "closed-form", None, portfolio, diagnostics)


def build_ad_portfolio(inputs):
    """Portfolio density ``w(y) = K^{-1}(y)`` on the image of the cash-flow support."""
    bm = inputs.binding
    lo, hi = inputs.phi1.support
    k_lo, k_hi = (float(v) for v in bm.map(np.array([lo, hi])))
    u = np.linspace(0.0, 1.0, 65)
    bps = bm.map(inputs.phi1.coupled(np.minimum(u, 1.0 - u), u > 0.5))
    spd_bps = np.asarray(inputs.spd.breakpoints, dtype=float)
    bps = np.concatenate([bps, spd_bps[(spd_bps > k_lo) & (spd_bps < k_hi)]])
    return SignedMeasure(bm.inverse, (k_lo, k_hi), (), tuple(np.unique(bps)))


def portfolio_value(inputs, portfolio, rtol=1e-10):
    """``int q d(rho)``: the price of a strike-space portfolio."""
    return integrate_measure(inputs.spd, portfolio, rtol=rtol, atol=1e-300)


def finite_portfolio_value(inputs, n):
    """Midpoint-weighted portfolio of cash-or-nothing spreads on ``n`` equiprobable intervals.

    Uses ``n + 1`` quantile points so that the intervals cover all of the
    cash-flow mass. The returned portfolio ``rho_d`` holds digital calls at
    the benchmark quantiles ``y_k``.
    """
    if int(n) != n or n < 2:
        raise ConfigError(f"partition count must be an integer >= 2, got {n}")
    n = int(n)
    k = np.arange(n + 1)
    upper = 2 * k > n
    prob = np.where(upper, (n - k) / n, k / n)
    x = inputs.phi1.coupled(prob, upper)
    y = inputs.phi2.coupled(prob, upper)
    spd = inputs.spd
    mass = np.diff(spd.cumulative(y))
    mids = 0.5 * (x[:-1] + x[1:])
    value = float(np.sum(mids * mass))

    weights = np.empty(n + 1)
    weights[0] = mids[0]
    weights[1:-1] = 0.5 * (x[2:] - x[:-2])
    weights[-1] = -mids[-1]
    atoms = tuple((float(a), float(b)) for a, b in zip(y, weights) if b != 0.0)
    merged = {}
    for a, b in atoms:
        merged[a] = merged.get(a, 0.0) + b
    rho = SignedMeasure.from_atoms(sorted(merged.items()))
    diagnostics = {
        "tail_mass": float(inputs.phi1.tail_mass),
        "covered_state_price": float(np.sum(mass)),
        "portfolio_total_variation": total_variation(rho),
    }
    return ValuationReport(value, "finite-n", n, rho, diagnostics)


def digital_portfolio_value(inputs, rho):
    """Price a digital-call portfolio: ``sum weight * int_{y}^{inf} q``."""
    return integrate_measure(inputs.spd.upper_mass, rho)


def convergence_study(inputs, ns):
    """Rows of ``(n, value_n, abs_error, rel_error)`` against the closed form."""
    ns = [int(n) for n in ns]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("partition counts must be strictly increasing")
    ref = value_closed_form(inputs, with_portfolio=False).value
    rows = []
    for n in ns:
        v = finite_portfolio_value(inputs, n).value
        err = abs(v - ref)
        rows.append({"n": n, "value": v, "abs_error": err,
                     "rel_error": err / abs(ref) if ref != 0 else err})
    return {"closed_form": ref, "rows": rows}


def affine_value(inputs, c=1.0, a=0.0, rtol=EPS_QUAD):
    """Value of ``c * CF + a`` through the transformed cash-flow law."""
    shifted = inputs.with_cash_flow(AffineDistribution(inputs.phi1, c, a))
    return value_closed_form(shifted, rtol=rtol, with_portfolio=False).value


def mm_separated_value(inputs, a, rtol=EPS_QUAD):
    """Value of ``CF + a``; equals ``V + a * B_t`` when state prices cover the bond."""
    return affine_value(inputs, 1.0, a, rtol)


def scaled_value(inputs, c, rtol=EPS_QUAD):
    """Value of ``c * CF`` for ``c > 0`` (``NonPositiveScale`` otherwise)."""
    return affine_value(inputs, c, 0.0, rtol)


@dataclass(frozen=True)
class SharpeanScore:
    shift: float
    sigma: float
    score: float


def sharpean_operation(cf, ctx=None):
    """Shift a unimodal cash flow to start at zero and scale by its spread.

    ``score = (E[CF] - inf supp CF) / std(CF)``, which is unchanged by
    positive scaling and by adding a constant.

    Raises:
        NotUnimodal: the density has more than one local maximum.
        ZeroVariance: the cash flow is (numerically) deterministic.
    """
    if getattr(cf, "degenerate", False):
        raise ZeroVariance("cash flow was estimated from identical samples")
    if not is_unimodal(cf):
        raise NotUnimodal("cash-flow density has more than one local maximum")
    shift = float(cf.support[0])
    mean = float(cf.mean())
    sigma = float(cf.std())
    if not sigma > 1e-14 * max(abs(mean), abs(shift), 1e-300):
        raise ZeroVariance("cash flow has zero variance")
    return SharpeanScore(shift, sigma, (mean - shift) / sigma)


@dataclass(frozen=True)
class ContinuityCheck:
    lhs: float
    rhs: float
    constant: float
    l1_distance: float
    holds: bool
    sup_q: float
    sup_q_rhs: float
    sup_q_holds: bool


def _kernel_sup(inputs, points=4097):
    phi2 = inputs.phi2
    u = np.linspace(0.0, 1.0, points)
    k = np.unique(np.concatenate([phi2.coupled(np.minimum(u, 1.0 - u), u > 0.5), phi2.breakpoints]))
    qk = inputs.spd(k)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.exp(np.log(qk) - phi2.logpdf(k))
    ratio = np.where(qk > 0, ratio, 0.0)
    return float(np.max(ratio)), inputs.spd.sup()


def quantile_l1_distance(da, db, rtol=1e-10):
    """``int_0^1 |Fa^{-1} - Fb^{-1}| du``, computed as ``int |Fa - Fb| dx``."""
    lo = min(da.support[0], db.support[0])
    hi = max(da.support[1], db.support[1])
    pts = np.concatenate([da.breakpoints, db.breakpoints, [lo, hi]])
    pts = np.unique(pts[(pts >= lo) & (pts <= hi)])
    return integrate(lambda x: np.abs(da.cdf(x) - db.cdf(x)), pts, rtol=rtol, atol=1e-300).value


def continuity_bound_check(inputs_a, inputs_b, eps=1e-8):
    """Compare ``|V_a - V_b|`` with ``C * int |Fa^{-1} - Fb^{-1}| du``.

    ``C`` is ``sup q / phi2`` over the benchmark support, the constant that
    makes the bound hold under the comonotone coupling. The bound with
    ``sup q`` alone is reported alongside.

    Raises:
        UnboundedQ: the constant is not finite.
    """
    same_phi2 = inputs_a.phi2 is inputs_b.phi2 or inputs_a.phi2.describe() == inputs_b.phi2.describe()
    if not same_phi2 or inputs_a.spd is not inputs_b.spd:
        raise ConfigError("continuity check needs a shared benchmark law and SPD")
    const, sup_q = _kernel_sup(inputs_a)
    if not (math.isfinite(const) and math.isfinite(sup_q)):
        raise UnboundedQ("state price density is unbounded relative to the benchmark law")
    va = value_closed_form(inputs_a, with_portfolio=False).value
    vb = value_closed_form(inputs_b, with_portfolio=False).value
    lhs = abs(va - vb)
    dist = quantile_l1_distance(inputs_a.phi1, inputs_b.phi1)
    rhs = const * dist
    tol = eps * (1.0 + abs(va) + abs(vb))
    return ContinuityCheck(lhs, rhs, const, dist, lhs <= rhs + tol, sup_q, sup_q * dist,
                           lhs <= sup_q * dist + tol)


def write_integrand_csv(inputs, path, points=513):
    u = np.linspace(0.0, 1.0, points)
    x = inputs.phi1.coupled(np.minimum(u, 1.0 - u), u > 0.5)
    vals = integrand(inputs, x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "integrand"])
        for a, b in zip(x, vals):
            w.writerow([repr(float(a)), repr(float(b))])
