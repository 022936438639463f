import json
import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from spdval.distributions import AnalyticDistribution  # noqa: E402
from spdval.models import LognormalMarket  # noqa: E402
from spdval.option_surface import StatePriceDensity  # noqa: E402

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile(
    "thorough", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ORACLES = json.loads((Path(__file__).parent / "data" / "oracles.json").read_text())


@pytest.fixture
def oracle():
    return ORACLES


@pytest.fixture
def market():
    """Lognormal benchmark, S0=100, r=2%, sigma=20%, T=1, physical drift 6%."""
    return LognormalMarket(100.0, 0.02, 0.2, 1.0, mu=0.06)


@pytest.fixture
def unit_uniform():
    return AnalyticDistribution("uniform", low=0.0, high=1.0)


@pytest.fixture
def unit_spd():
    """``q = 1`` on ``[0, 1]`` with ``B_t = 1``."""
    return StatePriceDensity.from_grid([0.0, 1.0], [1.0, 1.0], bond_price=1.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
