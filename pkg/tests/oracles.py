"""Independent reference values built only from scipy and closed forms."""

import math

import numpy as np
from scipy import integrate, stats


def bs_call(S, K, r, sigma, T):
    d1 = (math.log(S / K) + (r + 0.5 * sigma**2) * T) / (sigma * math.sqrt(T))
    d2 = d1 - sigma * math.sqrt(T)
    return S * stats.norm.cdf(d1) - K * math.exp(-r * T) * stats.norm.cdf(d2)


def bs_digital(S, K, r, sigma, T):
    d2 = (math.log(S / K) + (r - 0.5 * sigma**2) * T) / (sigma * math.sqrt(T))
    return math.exp(-r * T) * stats.norm.cdf(d2)


def rn_density(S, K, r, sigma, T):
    """Discounted risk-neutral lognormal density at strike ``K``."""
    s = sigma * math.sqrt(T)
    m = math.log(S) + (r - 0.5 * sigma**2) * T
    return math.exp(-r * T) * stats.lognorm(s=s, scale=math.exp(m)).pdf(K)


def lognormal_value(S, r, sigma, T, mu, cf_sigma_multiplier=1.0, cf_mu_shift=0.0):
    """Closed-form value of a lognormal cash flow bound to a lognormal benchmark.

    The benchmark has physical drift ``mu``; state prices are the
    risk-neutral lognormal. Then ``q / phi2`` is ``B * K**gamma * e**c`` and
    the value is a lognormal moment.
    """
    s = sigma * math.sqrt(T)
    m2 = math.log(S) + (mu - 0.5 * sigma**2) * T
    mq = math.log(S) + (r - 0.5 * sigma**2) * T
    s1 = s * cf_sigma_multiplier
    m1 = math.log(S) + (mu - 0.5 * (sigma * cf_sigma_multiplier) ** 2) * T + cf_mu_shift
    gamma = (mq - m2) / s**2
    c0 = (m2**2 - mq**2) / (2 * s**2)
    alpha = 1.0 + gamma * s / s1
    beta = -r * T + c0 + gamma * (m2 - s * m1 / s1)
    return math.exp(beta + alpha * m1 + 0.5 * alpha**2 * s1**2)


def gaussian_abs_entropy(mean_gap):
    """``int |log p/q| dP`` for ``P = N(0, 1)``, ``Q = N(gap, 1)`` by quadrature."""
    f = lambda x: abs(mean_gap * x - 0.5 * mean_gap**2) * stats.norm.pdf(x)
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def uniform_vs_linear_distance():
    """``d(U[0,1], 2x dx)`` by adaptive quadrature."""
    f = lambda x: abs(math.log(2 * x)) * (2 * x) / (1 + 2 * x)
    return integrate.quad(f, 0, 1, points=[0.5], epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def riemann_uniform_vs_linear(nodes=10**6):
    x = (np.arange(nodes) + 0.5) / nodes
    return float(np.mean(np.abs(np.log(2 * x)) * (2 * x) / (1 + 2 * x)))


def lognormal_binding(x, m1, s1, m2, s2):
    return math.exp(m2 + s2 * (math.log(x) - m1) / s1)


def all_values():
    """Values frozen into ``data/oracles.json``."""
    return {
        "exp1_cdf_at_1": 1 - math.exp(-1),
        "exp2_median": math.log(2) / 2,
        "bs_call_100_100": bs_call(100, 100, 0.02, 0.2, 1.0),
        "bs_digital_fwd": bs_digital(100, 100 * math.exp(0.02), 0.02, 0.2, 1.0),
        "rn_density_100": rn_density(100, 100, 0.02, 0.2, 1.0),
        "bond_2pct": math.exp(-0.02),
        "idempotent_value": lognormal_value(100, 0.02, 0.2, 1.0, 0.06),
        "skewed_value": lognormal_value(100, 0.02, 0.2, 1.0, 0.06, cf_sigma_multiplier=2.0),
        "mm_shift_10": lognormal_value(100, 0.02, 0.2, 1.0, 0.06) + 10 * math.exp(-0.02),
        "gaussian_kl": 0.5,
        "gaussian_abs_entropy": gaussian_abs_entropy(1.0),
        "uniform_linear_distance": uniform_vs_linear_distance(),
        "uniform_linear_distance_riemann": riemann_uniform_vs_linear(),
        "uniform_2_4_sigma": 1 / math.sqrt(3),
        "uniform_2_4_score": math.sqrt(3),
        "default_atom_p10": 0.1 * math.exp(-0.02),
    }
