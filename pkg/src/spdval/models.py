"""Reference lognormal market used for fixtures, oracles and benchmarks."""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import AnalyticDistribution
from .option_surface import LognormalCallCurve, MarketContext, state_price_density


@dataclass
class LognormalMarket:
    """Benchmark with physical drift ``mu`` and risk-neutral drift ``r``."""

    spot: float
    r: float
    sigma: float
    T: float
    mu: float = None
    survival: float = 1.0

    def __post_init__(self):
        if self.mu is None:
            self.mu = self.r
        self.context = MarketContext.from_rate(self.r, self.spot, T=self.T)
        self.curve = LognormalCallCurve(self.context, self.sigma, self.survival)
        self.spd = state_price_density(self.curve)

    def physical(self, sigma_multiplier=1.0):
        """Law of ``S(T)`` under the physical measure (volatility optionally scaled)."""
        s = self.sigma * sigma_multiplier
        loc = math.log(self.spot / self.survival) + (self.mu - 0.5 * s * s) * self.T
        return AnalyticDistribution("lognormal", mu=loc, sigma=s * math.sqrt(self.T))

    def quote_strikes(self, n=15, z_lo=-5.0, z_hi=4.5):
        """Strikes at risk-neutral log-quantiles spanning the tails."""
        z = np.linspace(z_lo, z_hi, n)
        vol = self.sigma * math.sqrt(self.T)
        return self.curve.forward * np.exp(-0.5 * vol * vol + vol * z)

    def quotes(self, n=15, z_lo=-5.0, z_hi=4.5):
        K = self.quote_strikes(n, z_lo, z_hi)
        return np.column_stack([K, self.curve.price(K)])
