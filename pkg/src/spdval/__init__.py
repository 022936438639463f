"""Value stochastic cash flows with Arrow-Debreu portfolios priced off a call-price curve."""

from ._kernels import BACKEND
from .binding import BindingMap, build_binding_map, derivative_consistency, verify_measure_preserving
from .distributions import (
    AffineDistribution,
    AnalyticDistribution,
    DensityDistribution,
    Distribution,
    GridDistribution,
    MixtureDistribution,
    cdf_from_density,
    check_fsd,
    estimate_density_from_samples,
    expectation,
    quantile,
)
from .errors import SpdvalError
from .metrics import MeasurePair, relative_entropy, symmetric_distance
from .option_surface import (
    FittedCallCurve,
    LognormalCallCurve,
    MarketContext,
    StatePriceDensity,
    arbitrage_report,
    call_prices_from_spd,
    detect_default_mass,
    digital_price,
    fit_call_curve,
    implied_short_rate,
    recover_bond,
    recover_spot,
    risk_neutral_measure,
    state_price_density,
)
from .portfolio import SignedMeasure, combine, integrate_measure, total_variation
from .valuation import (
    ValuationInputs,
    ValuationReport,
    build_ad_portfolio,
    continuity_bound_check,
    convergence_study,
    finite_portfolio_value,
    mm_separated_value,
    scaled_value,
    sharpean_operation,
    value_closed_form,
)

__version__ = "0.1.0"
