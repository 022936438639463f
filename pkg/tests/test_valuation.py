import csv
import math

import numpy as np
import pytest

from oracles import lognormal_value
from spdval.distributions import (
    AffineDistribution,
    AnalyticDistribution,
    MixtureDistribution,
    check_fsd,
    estimate_density_from_samples,
)
from spdval.errors import ConfigError, DomainNotCovered, NonPositiveScale, NotUnimodal, ZeroVariance
from spdval.option_surface import StatePriceDensity, recover_spot
from spdval.portfolio import integrate_measure, total_variation
from spdval.valuation import (
    ValuationInputs,
    build_ad_portfolio,
    continuity_bound_check,
    convergence_study,
    digital_portfolio_value,
    finite_portfolio_value,
    mm_separated_value,
    portfolio_value,
    scaled_value,
    sharpean_operation,
    value_closed_form,
    write_integrand_csv,
)


def U(lo, hi):
    return AnalyticDistribution("uniform", low=lo, high=hi)


@pytest.fixture
def uniform_inputs(unit_uniform, unit_spd):
    return ValuationInputs(unit_uniform, unit_uniform, unit_spd)


@pytest.fixture
def idempotent(market):
    phi = market.physical()
    return ValuationInputs(phi, phi, market.spd, market.context)


class TestClosedForm:
    """Closed-form value against hand computations and the lognormal oracle."""

    def test_uniform_idempotent(self, uniform_inputs):
        assert value_closed_form(uniform_inputs).value == pytest.approx(0.5, rel=1e-12)

    def test_shifted_uniform(self, unit_spd, unit_uniform):
        inputs = ValuationInputs(U(0.5, 1.5), unit_uniform, unit_spd)
        assert value_closed_form(inputs).value == pytest.approx(1.0, rel=1e-12)

    def test_lognormal_idempotent(self, idempotent, oracle):
        v = value_closed_form(idempotent).value
        assert v == pytest.approx(oracle["idempotent_value"], rel=1e-6)
        assert v == pytest.approx(100.0, abs=0.1)

    def test_equals_spot_recovery(self, idempotent, market):
        v = value_closed_form(idempotent).value
        assert v == pytest.approx(recover_spot(market.spd).from_integral, rel=1e-4)

    def test_skewed_oracle(self, market, oracle):
        inputs = ValuationInputs(market.physical(2.0), market.physical(), market.spd, market.context)
        assert value_closed_form(inputs).value == pytest.approx(oracle["skewed_value"], rel=1e-6)

    def test_diagnostics(self, idempotent):
        rep = value_closed_form(idempotent)
        assert rep.method == "closed-form"
        assert rep.diagnostics["measure_preservation"] < 1e-6
        assert rep.diagnostics["quadrature_error"] < 1e-6
        assert set(rep.to_dict()) >= {"value", "method", "n", "diagnostics", "errors"}

    def test_distribution_only(self, market):
        a = market.physical()
        b = market.physical()
        va = value_closed_form(ValuationInputs(a, market.physical(), market.spd)).value
        vb = value_closed_form(ValuationInputs(b, market.physical(), market.spd)).value
        assert va == vb

    def test_uncovered_domain(self, unit_spd):
        with pytest.raises(DomainNotCovered):
            value_closed_form(ValuationInputs(U(0, 1), U(0, 2), unit_spd))

    def test_not_linear(self, market):
        # the value of an independent sum differs from the sum of values
        n = AnalyticDistribution("normal", mean=100, sd=10)
        total = AnalyticDistribution("normal", mean=200, sd=10 * math.sqrt(2))
        phi2 = market.physical()

        def v(d):
            return value_closed_form(ValuationInputs(d, phi2, market.spd), with_portfolio=False).value

        assert abs(v(total) - 2 * v(n)) > 1e-3


class TestPortfolio:
    def test_identity_weights(self, idempotent):
        rho = build_ad_portfolio(idempotent)
        y = np.array([80.0, 100.0, 130.0])
        np.testing.assert_allclose(rho.w(y), y, rtol=1e-10)

    def test_rescaled_uniform(self, unit_uniform):
        spd = StatePriceDensity.from_grid([0.0, 2.0], [0.5, 0.5], bond_price=1.0)
        rho = build_ad_portfolio(ValuationInputs(unit_uniform, U(0, 2), spd))
        np.testing.assert_allclose(rho.w(np.array([0.4, 1.0, 1.8])), [0.2, 0.5, 0.9], rtol=1e-12)

    def test_prices_to_closed_form(self, idempotent):
        rep = value_closed_form(idempotent)
        assert portfolio_value(idempotent, rep.portfolio) == pytest.approx(rep.value, rel=1e-9)

    def test_long_only_for_positive_cash_flow(self, idempotent):
        rho = build_ad_portfolio(idempotent)
        assert total_variation(rho) == pytest.approx(
            integrate_measure(lambda k: np.ones_like(k), rho), rel=1e-10)


class TestFinitePortfolio:
    def test_uniform_n4_exact(self, uniform_inputs):
        rep = finite_portfolio_value(uniform_inputs, 4)
        assert rep.value == pytest.approx(0.5, abs=1e-15)
        assert rep.n == 4 and rep.method == "finite-n"

    def test_lognormal_n1000(self, idempotent):
        ref = value_closed_form(idempotent, with_portfolio=False).value
        assert finite_portfolio_value(idempotent, 1000).value == pytest.approx(ref, rel=1e-3)

    def test_coarse_smoke(self, idempotent):
        rep = finite_portfolio_value(idempotent, 2)
        assert math.isfinite(rep.value) and math.isfinite(total_variation(rep.portfolio))

    def test_digital_portfolio_prices_same(self, idempotent):
        rep = finite_portfolio_value(idempotent, 50)
        assert digital_portfolio_value(idempotent, rep.portfolio) == pytest.approx(rep.value, rel=1e-12)

    def test_digital_weights_first_atom(self, uniform_inputs):
        rho = finite_portfolio_value(uniform_inputs, 4).portfolio
        assert rho.atoms[0] == (0.0, 0.125)

    def test_bad_n(self, uniform_inputs):
        with pytest.raises(ConfigError):
            finite_portfolio_value(uniform_inputs, 1)


class TestConvergence:
    def test_uniform_exact(self, uniform_inputs):
        rows = convergence_study(uniform_inputs, [2, 10, 100])["rows"]
        assert max(r["abs_error"] for r in rows) < 1e-14

    def test_skewed_decreasing(self, market):
        inputs = ValuationInputs(market.physical(2.0), market.physical(), market.spd, market.context)
        rows = convergence_study(inputs, [10, 100, 1000, 10000])["rows"]
        errs = [r["rel_error"] for r in rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-3

    def test_ns_must_increase(self, uniform_inputs):
        with pytest.raises(ConfigError):
            convergence_study(uniform_inputs, [100, 10])


class TestAffineTransforms:
    def test_zero_shift(self, idempotent):
        v = value_closed_form(idempotent).value
        assert mm_separated_value(idempotent, 0.0) == pytest.approx(v, rel=1e-12)

    def test_shift_ten(self, idempotent, oracle):
        assert mm_separated_value(idempotent, 10.0) == pytest.approx(oracle["mm_shift_10"], abs=0.01)

    def test_negative_shift(self, idempotent):
        v = value_closed_form(idempotent).value
        B = idempotent.bond_price
        assert mm_separated_value(idempotent, -5.0) == pytest.approx(v - 5 * B, rel=1e-9)

    def test_scaling(self, uniform_inputs, idempotent):
        assert scaled_value(uniform_inputs, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert scaled_value(uniform_inputs, 2.0) == pytest.approx(1.0, rel=1e-12)
        assert scaled_value(idempotent, 0.5) == pytest.approx(50.0, abs=0.05)

    def test_nonpositive_scale(self, uniform_inputs):
        with pytest.raises(NonPositiveScale):
            scaled_value(uniform_inputs, 0.0)


class TestSharpean:
    def test_uniform_2_4(self, oracle):
        s = sharpean_operation(U(2, 4))
        assert s.shift == 2.0
        assert s.sigma == pytest.approx(oracle["uniform_2_4_sigma"], rel=1e-10)
        assert s.score == pytest.approx(oracle["uniform_2_4_score"], rel=1e-10)

    def test_unit_uniform(self):
        assert sharpean_operation(U(0, 1)).score == pytest.approx(math.sqrt(3), rel=1e-10)

    def test_affine_invariance(self):
        cf = AnalyticDistribution("lognormal", mu=0.0, sigma=0.4)
        a = sharpean_operation(cf).score
        b = sharpean_operation(AffineDistribution(cf, 3.0, 7.0)).score
        assert b == pytest.approx(a, abs=1e-9)

    def test_bimodal(self):
        bimodal = MixtureDistribution([(0.5, AnalyticDistribution("normal", mean=-3, sd=1)),
                                       (0.5, AnalyticDistribution("normal", mean=3, sd=1))])
        with pytest.raises(NotUnimodal):
            sharpean_operation(bimodal)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            sharpean_operation(estimate_density_from_samples(np.full(50, 3.0)))


class TestContinuity:
    def test_identical(self, uniform_inputs):
        chk = continuity_bound_check(uniform_inputs, uniform_inputs)
        assert chk.lhs == 0.0 and chk.rhs == 0.0 and chk.holds

    def test_uniform_shift(self, unit_spd, unit_uniform):
        a = ValuationInputs(U(0, 1), unit_uniform, unit_spd)
        b = ValuationInputs(U(0.01, 1.01), unit_uniform, unit_spd)
        chk = continuity_bound_check(a, b)
        assert chk.lhs == pytest.approx(0.01, rel=1e-8)
        assert chk.rhs == pytest.approx(0.01, rel=1e-8)
        assert chk.holds

    def test_sup_q_constant_can_fail(self):
        # q = 0.5 on [0, 2] so sup q = 0.5 but the value moves one-for-one
        spd = StatePriceDensity.from_grid([0.0, 2.0], [0.5, 0.5], bond_price=1.0)
        phi2 = U(0, 2)
        a = ValuationInputs(U(0, 2), phi2, spd)
        b = ValuationInputs(U(0.1, 2.1), phi2, spd)
        chk = continuity_bound_check(a, b)
        assert chk.lhs == pytest.approx(0.1, rel=1e-8)
        assert chk.holds and not chk.sup_q_holds

    def test_variance_bumped_lognormal(self, market):
        phi2 = market.physical()
        for mult in (0.8, 1.2, 1.5):
            a = ValuationInputs(phi2, phi2, market.spd)
            b = ValuationInputs(market.physical(mult), phi2, market.spd)
            assert continuity_bound_check(a, b).holds

    def test_requires_shared_benchmark(self, unit_spd, unit_uniform):
        a = ValuationInputs(U(0, 1), unit_uniform, unit_spd)
        b = ValuationInputs(U(0, 1), U(0, 0.5), unit_spd)
        with pytest.raises(ConfigError):
            continuity_bound_check(a, b)


class TestMonotonicity:
    def test_shift_dominance(self, market):
        phi2 = market.physical()
        a = market.physical()
        b = AffineDistribution(a, 1.0, 5.0)
        assert check_fsd(a, b, np.linspace(1, 400, 2001)).dominates
        va = value_closed_form(ValuationInputs(a, phi2, market.spd), with_portfolio=False).value
        vb = value_closed_form(ValuationInputs(b, phi2, market.spd), with_portfolio=False).value
        assert va < vb


def test_lognormal_oracle_self_consistent():
    assert lognormal_value(100, 0.02, 0.2, 1.0, 0.06) == pytest.approx(100.0, rel=1e-12)


def test_integrand_csv(tmp_path, uniform_inputs):
    path = tmp_path / "i.csv"
    write_integrand_csv(uniform_inputs, path, points=5)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "integrand"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
