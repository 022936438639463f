"""Call-price curves, state price densities and the implied diagnostics.

A :class:`CallCurve` maps strike to call price for one maturity. Fitted
curves are C2 piecewise cubics whose second derivative (the state price
density) is piecewise linear and nonnegative by construction, so digital
prices and Arrow-Debreu prices come from analytic derivatives of the
interpolant and never from finite differences of raw quotes.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from . import _kernels
from .distributions import Distribution, _check_probability, antiderivative, solve_monotone
from .errors import (
    ConfigError,
    InconsistentContext,
    InsufficientQuotes,
    NegativeDensity,
    NegativeMass,
    OutOfDomain,
    SlopeOutOfRange,
    SpdvalError,
    UnrepairableQuotes,
)
from .quadrature import integrate

log = logging.getLogger(__name__)

EPS_SPD_FITTED = 1e-3
EPS_SPD_ANALYTIC = 1e-8
EPS_SPOT = 1e-3
MAX_QUOTE_MOVE = 0.05
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class InvalidQuotes(SpdvalError):
    """Quotes with non-positive or duplicate strikes, or non-positive prices."""


@dataclass(frozen=True)
class MarketContext:
    """Valuation time ``t``, maturity ``T``, bond price ``B_t`` and spot ``S(t)``."""

    t: float
    T: float
    bond_price: float
    spot: float
    short_rate: float = None

    def __post_init__(self):
        for name in ("t", "T", "bond_price", "spot"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"context field {name!r} must be a finite number")
        if not self.T > self.t:
            raise ConfigError("maturity T must exceed valuation time t")
        if not 0.0 < self.bond_price <= 1.0:
            raise ConfigError("bond_price must lie in (0, 1]")
        if not self.spot > 0:
            raise ConfigError("spot must be positive")
        if self.short_rate is not None:
            implied = math.exp(-self.short_rate * self.tau)
            if abs(implied - self.bond_price) >= 1e-10:
                raise InconsistentContext(
                    f"bond_price {self.bond_price!r} disagrees with exp(-r(T-t)) = {implied!r}"
                )

    @property
    def tau(self):
        return self.T - self.t

    @property
    def rate_from_bond(self):
        return -math.log(self.bond_price) / self.tau

    @classmethod
    def from_rate(cls, r, spot, T=1.0, t=0.0):
        return cls(t=t, T=T, bond_price=math.exp(-r * (T - t)), spot=spot, short_rate=r)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                t=float(data.get("t", 0.0)),
                T=float(data["T"]),
                bond_price=float(data["bond_price"]),
                spot=float(data["spot"]),
                short_rate=None if data.get("short_rate") is None else float(data["short_rate"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad market context: {exc}") from exc

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def load_context(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return MarketContext.from_dict(data)


# --- curves -----------------------------------------------------------------


class CallCurve:
    """Strike-to-price map ``K -> C(K)`` on ``[0, k_max]`` for one maturity."""

    kind = "abstract"
    quotes = None

    def price(self, K):
        raise NotImplementedError

    def slope(self, K):
        raise NotImplementedError

    def convexity(self, K):
        raise NotImplementedError

    def _domain_check(self, K):
        K = np.asarray(K, dtype=float)
        if np.any(K < 0) or np.any(K > self.k_max) or np.any(~np.isfinite(K)):
            raise OutOfDomain(f"strike outside fitted domain [0, {self.k_max:.6g}]")
        return K


class LognormalCallCurve(CallCurve):
    """Closed-form lognormal-model call curve, optionally with a default atom.

    With ``survival = 1 - p`` the curve is ``(1 - p)`` times the lognormal
    curve of an underlying worth ``spot / (1 - p)``, so ``C(0) = spot`` and
    the state-price atom at zero is ``p * B_t``.
    """

    kind = "lognormal"

    def __init__(self, context, sigma, survival=1.0):
        if not sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0 < survival <= 1:
            raise ConfigError("survival must lie in (0, 1]")
        self.context = context
        self.sigma = float(sigma)
        self.survival = float(survival)
        self.vol = self.sigma * math.sqrt(context.tau)
        self.underlying = context.spot / self.survival
        self.forward = self.underlying / context.bond_price
        self.k_max = self.forward * math.exp(12.0 * self.vol)

    def _d2(self, K):
        with np.errstate(divide="ignore"):
            return (np.log(self.forward / K) - 0.5 * self.vol**2) / self.vol

    def price(self, K):
        K = np.asarray(K, dtype=float)
        B = self.context.bond_price
        pos = K > 0
        Kp = np.where(pos, K, 1.0)
        d2 = self._d2(Kp)
        val = self.underlying * ndtr(d2 + self.vol) - Kp * B * ndtr(d2)
        return self.survival * np.where(pos, val, self.underlying - K * B)

    def slope(self, K):
        K = np.asarray(K, dtype=float)
        pos = K > 0
        d2 = self._d2(np.where(pos, K, 1.0))
        return -self.survival * self.context.bond_price * np.where(pos, ndtr(d2), 1.0)

    def convexity(self, K):
        K = np.asarray(K, dtype=float)
        pos = K > 0
        Kp = np.where(pos, K, 1.0)
        d2 = self._d2(Kp)
        dens = np.exp(-0.5 * d2 * d2) / (_SQRT_2PI * Kp * self.vol)
        return self.survival * self.context.bond_price * np.where(pos, dens, 0.0)

    @property
    def breakpoints(self):
        z = np.linspace(-12.0, 12.0, 97)
        pts = self.forward * np.exp(-0.5 * self.vol**2 + self.vol * z)
        return np.unique(np.concatenate([[0.0], pts[pts < self.k_max], [self.k_max]]))

    def to_dict(self):
        return {"type": "lognormal", "context": self.context.to_dict(), "sigma": self.sigma,
                "survival": self.survival}


def _cubic_from_q(knots, qvals, c0, s0):
    """Price ppoly on ``knots`` with piecewise-linear second derivative ``qvals``."""
    h = np.diff(knots)
    qcoef = np.vstack([np.diff(qvals) / h, qvals[:-1]])
    slope = antiderivative(knots, qcoef)
    slope[-1] += s0
    price = antiderivative(knots, slope)
    price[-1] += c0
    return price


class FittedCallCurve(CallCurve):
    """C2 piecewise-cubic call curve fitted to quotes.

    On ``[knots[0], knots[-1]]`` the second derivative is the piecewise
    linear function through ``qvals``. Below the first knot the curve is
    linear with slope ``s0``; above the last knot it decays exponentially,
    matching value and slope.
    """

    kind = "fitted"

    def __init__(self, context, knots, qvals, c0, s0, quotes=None, repaired=None,
                 max_relative_move=0.0):
        self.context = context
        self.knots = np.asarray(knots, dtype=float)
        self.qvals = np.asarray(qvals, dtype=float)
        self.c0 = float(c0)
        self.s0 = float(s0)
        self.quotes = None if quotes is None else np.asarray(quotes, dtype=float)
        self.repaired = None if repaired is None else np.asarray(repaired, dtype=float)
        self.max_relative_move = float(max_relative_move)
        self._coef = _cubic_from_q(self.knots, self.qvals, self.c0, self.s0)
        end = self.knots[-1:]
        self.c_end = float(_kernels.ppoly_eval(self.knots, self._coef, end, 0)[0])
        self.s_end = float(_kernels.ppoly_eval(self.knots, self._coef, end, 1)[0])
        if not (self.c_end > 0 and self.s_end < 0):
            raise UnrepairableQuotes("fitted curve does not decay beyond the last quote")
        self.decay = -self.s_end / self.c_end
        floor = 1e-16 * context.spot
        span = math.log(self.c_end / floor) / self.decay if self.c_end > floor else 0.0
        self.k_max = float(self.knots[-1] + span)

    def _pieces(self, K):
        K = np.asarray(K, dtype=float)
        return K, K < self.knots[0], K > self.knots[-1]

    def price(self, K):
        K, left, right = self._pieces(K)
        mid = _kernels.ppoly_eval(self.knots, self._coef, K, 0)
        with np.errstate(over="ignore"):
            tail = self.c_end * np.exp(-self.decay * (K - self.knots[-1]))
        lin = self.c0 + self.s0 * (K - self.knots[0])
        return np.where(left, lin, np.where(right, tail, mid))

    def slope(self, K):
        K, left, right = self._pieces(K)
        mid = _kernels.ppoly_eval(self.knots, self._coef, K, 1)
        with np.errstate(over="ignore"):
            tail = self.s_end * np.exp(-self.decay * (K - self.knots[-1]))
        return np.where(left, self.s0, np.where(right, tail, mid))

    def convexity(self, K):
        K, left, right = self._pieces(K)
        mid = _kernels.ppoly_eval(self.knots, self._coef, K, 2)
        with np.errstate(over="ignore"):
            tail = self.decay**2 * self.c_end * np.exp(-self.decay * (K - self.knots[-1]))
        return np.where(left, 0.0, np.where(right, tail, mid))

    @property
    def breakpoints(self):
        tail = self.knots[-1] + np.arange(1, 64) / self.decay
        tail = tail[tail < self.k_max]
        return np.unique(np.concatenate([[0.0], self.knots, tail, [self.k_max]]))

    def to_dict(self):
        out = {
            "type": "fitted",
            "context": self.context.to_dict(),
            "knots": self.knots.tolist(),
            "q": self.qvals.tolist(),
            "c0": self.c0,
            "s0": self.s0,
            "max_relative_move": self.max_relative_move,
        }
        if self.quotes is not None:
            out["quotes"] = self.quotes.tolist()
        if self.repaired is not None:
            out["repaired"] = self.repaired.tolist()
        return out


def curve_from_dict(data):
    ctx = MarketContext.from_dict(data["context"])
    if data.get("type") == "lognormal":
        return LognormalCallCurve(ctx, data["sigma"], data.get("survival", 1.0))
    if data.get("type") == "fitted":
        return FittedCallCurve(ctx, data["knots"], data["q"], data["c0"], data["s0"],
                               quotes=data.get("quotes"), repaired=data.get("repaired"),
                               max_relative_move=data.get("max_relative_move", 0.0))
    raise ConfigError(f"unknown curve type {data.get('type')!r}")


# --- quote validation and repair ----------------------------------------------


def _clean_quotes(quotes):
    arr = np.asarray(quotes, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidQuotes("quotes must be (strike, price) pairs")
    if arr.shape[0] < 4:
        raise InsufficientQuotes(f"need at least 4 quotes, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidQuotes("quotes must be finite")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    if np.any(arr[:, 0] <= 0):
        raise InvalidQuotes("strikes must be positive")
    if np.any(np.diff(arr[:, 0]) == 0):
        raise InvalidQuotes("strikes must be distinct")
    if np.any(arr[:, 1] <= 0):
        raise InvalidQuotes("prices must be positive")
    return arr


def _constraint_matrix(K, ctx):
    """Rows ``G`` and offsets ``g`` with ``G @ P >= g`` for arbitrage-free quotes."""
    n = K.size
    h = np.diff(K)
    S = np.zeros((n - 1, n))
    S[np.arange(n - 1), np.arange(n - 1)] = -1.0 / h
    S[np.arange(n - 1), np.arange(1, n)] = 1.0 / h
    rows = [S[1:] - S[:-1], S[:1], -S[-1:], np.eye(n), -np.eye(n)]
    offs = [
        np.zeros(n - 2),
        [-ctx.bond_price],
        [0.0],
        np.maximum(ctx.spot - K * ctx.bond_price, 0.0),
        -np.full(n, ctx.spot),
    ]
    return np.vstack(rows), np.concatenate(offs)


def arbitrage_report(quotes, ctx, tol=1e-10):
    """Static-arbitrage checks on raw quotes: butterflies, slopes and price bounds."""
    arr = _clean_quotes(quotes)
    K, P = arr[:, 0].tolist(), arr[:, 1].tolist()
    scale = tol * ctx.spot
    out = {"butterfly": [], "monotonicity": [], "slope_bound": [], "lower_bound": [], "upper_bound": []}
    for i in range(1, len(K) - 1):
        wl = (K[i + 1] - K[i]) / (K[i + 1] - K[i - 1])
        wr = (K[i] - K[i - 1]) / (K[i + 1] - K[i - 1])
        fly = wl * P[i - 1] - P[i] + wr * P[i + 1]
        if fly < -scale:
            out["butterfly"].append({"strikes": [K[i - 1], K[i], K[i + 1]], "value": fly})
    slopes = (np.diff(P) / np.diff(K)).tolist()
    for i, s in enumerate(slopes):
        if s > tol:
            out["monotonicity"].append({"strikes": [K[i], K[i + 1]], "slope": s})
        if s < -ctx.bond_price - tol:
            out["slope_bound"].append({"strikes": [K[i], K[i + 1]], "slope": s})
    lower = [max(ctx.spot - k * ctx.bond_price, 0.0) for k in K]
    for k, p, lb in zip(K, P, lower):
        if p < lb - scale:
            out["lower_bound"].append({"strike": k, "price": p, "bound": lb})
        if p > ctx.spot + scale:
            out["upper_bound"].append({"strike": k, "price": p, "bound": ctx.spot})
    out["ok"] = not any(out[k] for k in ("butterfly", "monotonicity", "slope_bound",
                                         "lower_bound", "upper_bound"))
    return out


def project_quotes(quotes, ctx):
    """Least-squares projection of prices onto the arbitrage-free cone.

    Distances are relative to each quoted price. Returns the repaired prices
    and the largest relative move.
    """
    arr = _clean_quotes(quotes)
    K, P = arr[:, 0], arr[:, 1]
    G, g = _constraint_matrix(K, ctx)
    slack = G @ P - g
    if np.all(slack >= -1e-12 * ctx.spot):
        return P.copy(), 0.0
    scale = ctx.spot
    Gs, gs = G * scale, g
    w = 1.0 / P**2

    res = optimize.minimize(
        lambda x: float(np.sum(w * (x - P / scale) ** 2) * scale**2),
        np.clip(P / scale, 0, 1),
        jac=lambda x: 2.0 * w * (x - P / scale) * scale**2,
        constraints=[{"type": "ineq", "fun": lambda x: Gs @ x - gs, "jac": lambda x: Gs}],
        method="SLSQP",
        options={"maxiter": 2000, "ftol": 1e-16},
    )
    repaired = res.x * scale
    move = float(np.max(np.abs(repaired - P) / P))
    if not res.success and np.min(G @ repaired - g) < -1e-9 * ctx.spot:
        raise UnrepairableQuotes(f"convex projection failed: {res.message}", move)
    return repaired, move


# --- fitting ----------------------------------------------------------------


def _design(knots, K):
    """Matrix mapping ``(c0, s0, q_0..q_m)`` to prices at strikes ``K``."""
    m = knots.size
    cols = []
    for j in range(m + 2):
        z = np.zeros(m + 2)
        z[j] = 1.0
        coef = _cubic_from_q(knots, z[2:], z[0], z[1])
        cols.append(_kernels.ppoly_eval(knots, coef, K, 0))
    return np.column_stack(cols)


def _roughness(knots):
    h = np.diff(knots)
    m = knots.size
    D = np.zeros((m - 2, m))
    for i in range(m - 2):
        hbar = 0.5 * (h[i] + h[i + 1])
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
        D[i] /= math.sqrt(hbar)
    return D


def _solve_fit(K, P, ctx, refine):
    kscale = K[-1]
    pscale = ctx.spot
    Ks = K / kscale
    Ps = P / pscale
    B = ctx.bond_price * kscale / pscale
    knots = np.concatenate([np.linspace(a, b, refine + 1)[:-1] for a, b in zip(Ks[:-1], Ks[1:])] + [Ks[-1:]])
    m = knots.size
    A = _design(knots, Ks)
    D = _roughness(knots)
    H = np.zeros((m + 2, m + 2))
    H[2:, 2:] = D.T @ D
    trap = np.zeros(m)
    h = np.diff(knots)
    trap[:-1] += 0.5 * h
    trap[1:] += 0.5 * h
    end_slope = np.concatenate([[0.0, 1.0], trap])
    # the tail must decay on a scale no longer than the quoted strike span
    slope_cap = -Ps[-1] / (Ks[-1] - Ks[0])

    # start from discrete second differences of the quotes
    sec = np.diff(Ps) / np.diff(Ks)
    curv = np.interp(knots, Ks[1:-1],
                     np.diff(sec) / (0.5 * (Ks[2:] - Ks[:-2])))
    z0 = np.concatenate([[Ps[0], min(max(sec[0], -B), 0.0)], np.maximum(curv, 0.0)])
    bounds = [(None, None), (-B, 0.0)] + [(0.0, None)] * m
    scale_obj = 1.0 / max(float(np.sum((D @ z0[2:]) ** 2)), 1e-300)

    res = optimize.minimize(
        lambda z: scale_obj * float(z @ H @ z),
        z0,
        jac=lambda z: 2.0 * scale_obj * (H @ z),
        bounds=bounds,
        constraints=[
            {"type": "eq", "fun": lambda z: A @ z - Ps, "jac": lambda z: A},
            {"type": "ineq", "fun": lambda z: np.array([slope_cap - end_slope @ z]),
             "jac": lambda z: -end_slope[None, :]},
        ],
        method="SLSQP",
        options={"maxiter": 100, "ftol": 1e-15},
    )
    z = res.x.copy()
    z[2:] = np.maximum(z[2:], 0.0)
    z[1] = min(max(z[1], -B), 0.0)
    z = _polish(z, H, A, Ps, B, end_slope, slope_cap)
    c0 = z[0] * pscale
    s0 = z[1] * pscale / kscale
    qvals = z[2:] * pscale / kscale**2
    return knots * kscale, qvals, c0, s0


def _polish(z, H, A, Ps, B, end_slope, slope_cap):
    """Re-solve the equality-constrained problem on the detected active set.

    The tail-slope cap joins the active set only when the solution without
    it would break it.
    """
    n = z.size
    slope_tol = 1e-9 * abs(slope_cap)
    qmax = max(float(z[2:].max()), 1e-300)
    rows = [A]
    rhs = [Ps]
    for j in range(2, n):
        if z[j] <= 1e-9 * qmax:
            rows.append(np.eye(1, n, j))
            rhs.append([0.0])
    if abs(z[1] + B) <= 1e-12 * B:
        rows.append(np.eye(1, n, 1))
        rhs.append([-B])
    base_err = np.max(np.abs(A @ z - Ps))
    for extra in ([], [(end_slope[None, :], [slope_cap])]):
        E = np.vstack(rows + [r for r, _ in extra])
        e = np.concatenate(rhs + [v for _, v in extra])
        kkt = np.block([[2.0 * H, E.T], [E, np.zeros((E.shape[0], E.shape[0]))]])
        sol = np.linalg.lstsq(kkt, np.concatenate([np.zeros(n), e]), rcond=None)[0][:n]
        ok = (
            np.all(sol[2:] >= -1e-13 * qmax)
            and -B * (1 + 1e-13) <= sol[1] <= 0.0
            and np.max(np.abs(A @ sol - Ps)) <= base_err + 1e-15
            and end_slope @ sol <= slope_cap + slope_tol
        )
        if ok:
            sol[2:] = np.maximum(sol[2:], 0.0)
            sol[1] = min(max(sol[1], -B), 0.0)
            return sol
    return z


def fit_call_curve(quotes, ctx, max_move=MAX_QUOTE_MOVE, refine=4):
    """Fit an arbitrage-consistent C2 call curve through ``(strike, price)`` quotes.

    Quotes are first projected onto the arbitrage-free cone (convex,
    nonincreasing, slope at least ``-B_t``, within the trivial price
    bounds). The curve then interpolates the repaired quotes with a
    nonnegative piecewise-linear second derivative of minimal roughness on
    ``refine`` sub-knots per quote interval.

    Raises:
        InsufficientQuotes: fewer than four quotes.
        UnrepairableQuotes: the projection moves some quote by more than
            ``max_move`` relative to its price.
    """
    arr = _clean_quotes(quotes)
    repaired, move = project_quotes(arr, ctx)
    if move > max_move:
        raise UnrepairableQuotes(
            f"arbitrage repair moves a quote by {move:.2%} (limit {max_move:.0%})", move)
    K = arr[:, 0]
    knots, qvals, c0, s0 = _solve_fit(K, repaired, ctx, refine)
    curve = FittedCallCurve(ctx, knots, qvals, c0, s0, quotes=arr, repaired=repaired,
                            max_relative_move=move)
    resid = np.max(np.abs(curve.price(K) - repaired)) / ctx.spot
    curve.interpolation_residual = float(resid)
    if resid > 1e-8:
        log.warning("fitted curve misses repaired quotes by %.3g (relative to spot)", resid)
    return curve


def verify_curve(curve, points=4001, tol=1e-10, bound_tol=1e-6):
    """Check the no-arbitrage invariants of a curve on a verification grid.

    Price bounds are checked from the lowest quoted strike upward; below it
    the curve is a linear extrapolation whose gap to the spot is what
    ``recover_spot`` reports.
    """
    ctx = curve.context
    grid = np.unique(np.concatenate([curve.breakpoints, np.linspace(0, curve.k_max, points)]))
    C = curve.price(grid)
    d = curve.slope(grid)
    scale = tol * ctx.spot
    quotes = getattr(curve, "quotes", None)
    k_lo = float(quotes[0, 0]) if quotes is not None else 0.0
    lower = np.where(grid >= k_lo, np.maximum(ctx.spot - grid * ctx.bond_price, 0.0), -np.inf)
    h = np.diff(grid)
    fly = C[:-2] * (h[1:] / (h[:-1] + h[1:])) - C[1:-1] + C[2:] * (h[:-1] / (h[:-1] + h[1:]))
    return {
        "monotone": bool(np.all(np.diff(C) <= scale)),
        "convex": bool(np.all(fly >= -scale)),
        "slope_bounds": bool(np.all(d >= -ctx.bond_price - tol) and np.all(d <= tol)),
        "price_bounds": bool(np.all(C >= lower - bound_tol * ctx.spot)
                             and np.all(C <= ctx.spot * (1 + bound_tol))),
        "vanishes": bool(C[-1] <= 1e-12 * ctx.spot),
    }


def digital_price(curve, K):
    """Cash-or-nothing call price ``-C'(K)``."""
    K = curve._domain_check(K)
    return np.clip(-curve.slope(K), 0.0, curve.context.bond_price)


# --- state price density ------------------------------------------------------


class StatePriceDensity:
    """State price density ``q`` on ``[0, k_max]`` plus an optional atom at zero.

    ``cumulative(K)`` is ``int_0^K q``; ``mass(a, b)`` is therefore the
    price of the cash-or-nothing spread paying one unit on ``[a, b]``.
    """

    def __init__(self, q, cumulative, domain, bond_price, zero_atom=0.0, breakpoints=None,
                 source="", curve=None, eps_spd=EPS_SPD_FITTED):
        self._q = q
        self._cumulative = cumulative
        self.domain = (float(domain[0]), float(domain[1]))
        self.bond_price = float(bond_price)
        self.zero_atom = float(zero_atom)
        self.source = source
        self.curve = curve
        self.eps_spd = eps_spd
        bps = np.asarray(breakpoints if breakpoints is not None else np.linspace(*self.domain, 65), float)
        self.breakpoints = np.unique(np.clip(np.concatenate([bps, self.domain]), *self.domain))
        self.total_ac = float(np.ravel(self.cumulative(self.domain[1]))[0])

    def __call__(self, K):
        K = np.asarray(K, dtype=float)
        inside = (K >= self.domain[0]) & (K <= self.domain[1])
        return np.where(inside, np.asarray(self._q(np.clip(K, *self.domain)), dtype=float), 0.0)

    def cumulative(self, K):
        K = np.clip(np.asarray(K, dtype=float), *self.domain)
        return np.asarray(self._cumulative(K), dtype=float)

    def mass(self, a, b):
        return self.cumulative(b) - self.cumulative(a)

    def upper_mass(self, K):
        """``int_K^inf q``, the digital call price at strike ``K``."""
        return self.total_ac - self.cumulative(K)

    def integral(self, f=None, lo=None, hi=None, rtol=1e-12):
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        pts = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        pts = np.concatenate([[lo], pts, [hi]])
        if f is None:
            g = self
        else:
            def g(x):
                return np.asarray(f(x), dtype=float) * self(x)
        return integrate(g, pts, rtol=rtol, atol=1e-300).value

    def sup(self, points=20001):
        grid = np.unique(np.concatenate([self.breakpoints, np.linspace(*self.domain, points)]))
        return float(np.max(self(grid)))

    @classmethod
    def from_grid(cls, nodes, values, bond_price=None, zero_atom=0.0):
        """Piecewise-linear density through ``(nodes, values)``, zero outside."""
        x = np.asarray(nodes, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConfigError("SPD grid needs at least two strictly increasing strikes")
        if np.any(x < 0):
            raise ConfigError("SPD strikes must be nonnegative")
        if np.any(y < 0):
            raise NegativeDensity(f"negative state price {y.min():.6g}")
        coef = np.vstack([np.diff(y) / np.diff(x), y[:-1]])
        cum = antiderivative(x, coef)

        def q(K):
            return np.interp(K, x, y, left=0.0, right=0.0)

        def cumulative(K):
            K = np.asarray(K, dtype=float)
            inner = _kernels.ppoly_eval(x, cum, np.clip(K, x[0], x[-1]), 0)
            return np.where(K <= x[0], 0.0, inner)

        total = float(_kernels.ppoly_eval(x, cum, x[-1:], 0)[0])
        if bond_price is None:
            bond_price = total + zero_atom
        return cls(q, cumulative, (0.0, x[-1]), bond_price, zero_atom, breakpoints=x, source="grid")

    @classmethod
    def from_distribution(cls, dist, bond_price, zero_atom=0.0):
        """``q = B_t * pdf`` for a risk-neutral law given as a distribution."""
        lo, hi = dist.support
        if lo < 0:
            raise ConfigError("risk-neutral law must live on nonnegative strikes")

        def q(K):
            return bond_price * dist.pdf(K)

        def cumulative(K):
            return bond_price * dist.cdf(K)

        bps = np.concatenate([[0.0], dist.breakpoints])
        return cls(q, cumulative, (0.0, hi), bond_price, zero_atom, breakpoints=bps,
                   source="distribution", eps_spd=EPS_SPD_ANALYTIC)

    def to_dict(self, samples=513):
        out = {"source": self.source, "bond_price": self.bond_price, "zero_atom": self.zero_atom,
               "domain": list(self.domain)}
        if self.curve is not None:
            out["curve"] = self.curve.to_dict()
        grid = self.breakpoints
        if grid.size < samples:
            grid = np.unique(np.concatenate([grid, np.linspace(*self.domain, samples)]))
        out["grid"] = [[float(k), float(v)] for k, v in zip(grid, self(grid))]
        return out


def spd_from_dict(data):
    if "curve" in data:
        return state_price_density(curve_from_dict(data["curve"]))
    grid = np.asarray(data["grid"], dtype=float)
    return StatePriceDensity.from_grid(grid[:, 0], grid[:, 1], data.get("bond_price"),
                                       data.get("zero_atom", 0.0))


def state_price_density(curve, eps_neg=None, atom_floor=1e-6):
    """``q = C''`` with the default atom ``B_t + C'(0+)`` at zero strike.

    Atoms below ``atom_floor * B_t`` are treated as zero.

    Raises:
        NegativeDensity: ``C''`` dips below ``-eps_neg`` on the
            verification grid (a fitter defect, never a market signal).
    """
    ctx = curve.context
    grid = curve.breakpoints
    grid = np.unique(np.concatenate([grid, 0.5 * (grid[1:] + grid[:-1]),
                                     np.linspace(0.0, curve.k_max, 2001)]))
    qv = curve.convexity(grid)
    if eps_neg is None:
        eps_neg = 1e-8 * max(float(np.max(np.abs(qv))), 1e-300)
    if np.min(qv) < -eps_neg:
        raise NegativeDensity(f"curve second derivative reaches {np.min(qv):.6g}")
    slope0 = float(curve.slope(np.array([0.0]))[0])
    atom = ctx.bond_price + slope0
    if atom < atom_floor * ctx.bond_price:
        atom = 0.0

    def q(K):
        return np.maximum(curve.convexity(K), 0.0)

    def cumulative(K):
        return curve.slope(K) - slope0

    eps = EPS_SPD_ANALYTIC if curve.kind == "lognormal" else EPS_SPD_FITTED
    return StatePriceDensity(q, cumulative, (0.0, curve.k_max), ctx.bond_price, atom,
                             breakpoints=curve.breakpoints, source=curve.kind, curve=curve,
                             eps_spd=eps)


def call_prices_from_spd(spd, strikes, rtol=1e-13):
    """Rebuild ``C(K) = int_K^inf (y - K) q(y) dy`` by integrating ``q`` twice.

    The atom at zero pays nothing for ``K >= 0``. Computed as
    ``M1(K) - K * M0(K)`` with the upper partial moments accumulated
    panel by panel from the top of the domain.
    """
    K = np.asarray(strikes, dtype=float)
    lo, hi = spd.domain
    if np.any(K < lo) or np.any(K > hi):
        raise OutOfDomain("strike outside the state-price domain")
    nodes = np.unique(np.concatenate([K, [hi]]))
    m1 = np.zeros(nodes.size)
    for i in range(nodes.size - 2, -1, -1):
        a, b = nodes[i], nodes[i + 1]
        m1[i] = m1[i + 1] + spd.integral(lambda y: y, a, b, rtol=rtol)
    first = np.interp(K, nodes, m1)
    return first - K * spd.upper_mass(K)


def recover_bond(spd):
    """``int q dK + atom``; equals ``B_t`` for an arbitrage-free price system."""
    return spd.integral() + spd.zero_atom


@dataclass(frozen=True)
class SpotRecovery:
    from_integral: float
    from_limit: float = None


def recover_spot(spd, curve=None):
    """Spot from ``int K q dK`` and from the zero-strike limit of the curve."""
    curve = curve if curve is not None else spd.curve
    from_integral = spd.integral(lambda K: K)
    from_limit = None if curve is None else float(curve.price(np.array([0.0]))[0])
    return SpotRecovery(from_integral, from_limit)


def implied_short_rate(curve):
    """Short rate from the zero-strike slope, ``C'(0+) = -exp(-r (T - t))``."""
    v = -float(curve.slope(np.array([0.0]))[0])
    if 1.0 < v <= 1.0 + 1e-12:
        v = 1.0
    if not 0.0 < v <= 1.0:
        raise SlopeOutOfRange(f"-C'(0+) = {v:.12g} is outside (0, 1]")
    return -math.log(v) / curve.context.tau


@dataclass(frozen=True)
class DefaultMass:
    atom_value: float
    probability: float


def detect_default_mass(curve, r_ext):
    """State-price atom at zero implied by an external short rate.

    ``atom_value = exp(-r_ext (T - t)) + C'(0+)`` and
    ``probability = atom_value / B_t``.
    """
    ctx = curve.context
    slope0 = float(curve.slope(np.array([0.0]))[0])
    atom = math.exp(-r_ext * ctx.tau) + slope0
    if atom < -1e-6:
        raise NegativeMass(f"implied zero-strike atom {atom:.3g} is negative; r_ext inconsistent")
    atom = max(atom, 0.0)
    return DefaultMass(atom, atom / ctx.bond_price)


class RiskNeutralDistribution(Distribution):
    """The measure ``q / B_t`` with any default atom placed at zero.

    ``atom_probability`` is the point mass at zero; the density part has
    mass ``1 - atom_probability``. The CDF includes the atom, so
    ``B_t * (1 - cdf(K))`` is the digital call price for ``K > 0``.
    """

    kind = "risk-neutral"

    def __init__(self, spd):
        self.spd = spd
        self._mass = spd.zero_atom + spd.total_ac
        self.atom_probability = spd.zero_atom / self._mass
        self.has_atom = spd.zero_atom > 0
        self.normalization_gap = self._mass / spd.bond_price - 1.0
        self.support = spd.domain
        self.tail_mass = 0.0
        self._table_x = spd.breakpoints
        self._table_u = self.cdf(self._table_x)

    def pdf(self, x):
        return self.spd(x) / self._mass

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        val = (self.spd.zero_atom + self.spd.cumulative(x)) / self._mass
        return np.clip(np.where(x < self.support[0], 0.0, val), 0.0, 1.0)

    def quantile(self, u):
        u = _check_probability(u)
        j = np.clip(np.searchsorted(self._table_u, u, side="left"), 1, self._table_x.size - 1)
        out = solve_monotone(self.cdf, u, self._table_x[j - 1], self._table_x[j], deriv=self.pdf,
                             xtol=1e-13)
        out = np.where(u <= self.atom_probability, self.support[0], out)
        return np.where(u == 1.0, self.support[1], out)

    @property
    def breakpoints(self):
        return self._table_x


def risk_neutral_measure(spd):
    return RiskNeutralDistribution(spd)


# --- files --------------------------------------------------------------------


def read_two_column_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    try:
        data = np.array([[float(c) for c in r[:2]] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed numeric row ({exc})") from exc
    return header, data.reshape(-1, 2)


def read_quotes(path):
    """Quotes CSV with a ``strike, price`` header (any row order)."""
    header, data = read_two_column_csv(path)
    if "strike" not in header or "price" not in header:
        raise ConfigError(f"{path}: header must name 'strike' and 'price' columns")
    if header.index("strike") == 1:
        data = data[:, ::-1]
    return data


def write_spd_csv(spd, path, samples=1025):
    grid = np.unique(np.concatenate([spd.breakpoints, np.linspace(*spd.domain, samples)]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "q"])
        for k, v in zip(grid, spd(grid)):
            w.writerow([repr(float(k)), repr(float(v))])
