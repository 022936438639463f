import json
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from spdval.distributions import (
    AffineDistribution,
    AnalyticDistribution,
    DensityDistribution,
    GridDistribution,
    MixtureDistribution,
    cdf_from_density,
    check_fsd,
    estimate_density_from_samples,
    expectation,
    from_config,
    is_unimodal,
    load_distribution,
    quantile,
)
from spdval.errors import (
    ConfigError,
    NegativeDensity,
    NonNormalized,
    NonPositiveScale,
    OutOfRange,
    TooFewSamples,
)


def U(lo, hi):
    return AnalyticDistribution("uniform", low=lo, high=hi)


class TestCdfFromDensity:
    """CDF construction from analytic, grid and callable densities."""

    def test_uniform_identity(self):
        d = cdf_from_density(U(0, 1))
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(d.cdf(x), x, atol=1e-15)

    def test_exponential(self, oracle):
        d = AnalyticDistribution("exponential", rate=1.0)
        assert d.cdf(np.array([1.0]))[0] == pytest.approx(oracle["exp1_cdf_at_1"], abs=1e-8)
        quad = sp_integrate.quad(lambda t: math.exp(-t), 0, 1)[0]
        assert d.cdf(np.array([1.0]))[0] == pytest.approx(quad, abs=1e-8)

    def test_triangular_grid(self):
        d = cdf_from_density(([0.0, 0.5, 1.0], [0.0, 2.0, 0.0]), interpolation="linear")
        assert d.cdf(np.array([0.5]))[0] == pytest.approx(0.5, abs=1e-12)
        assert d.cdf(np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-12)

    def test_non_normalized_grid(self):
        with pytest.raises(NonNormalized):
            GridDistribution([0.0, 1.0], [2.0, 2.0], interpolation="linear")

    def test_negative_grid(self):
        with pytest.raises(NegativeDensity):
            GridDistribution([0.0, 0.5, 1.0], [1.5, -0.1, 0.6], interpolation="linear")

    def test_callable_density(self):
        d = cdf_from_density(lambda x: 2.0 * x, support=(0.0, 1.0))
        assert d.cdf(np.array([0.5]))[0] == pytest.approx(0.25, abs=1e-10)
        assert d.quantile(np.array([0.25]))[0] == pytest.approx(0.5, abs=1e-9)

    def test_grid_matches_analytic(self):
        ref = AnalyticDistribution("normal", mean=0.0, sd=1.0)
        x = np.linspace(-6, 6, 2001)
        g = GridDistribution(x, ref.pdf(x))
        t = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(g.cdf(t), ref.cdf(t), atol=1e-6)
        np.testing.assert_allclose(g.quantile(ref.cdf(t)), t, atol=1e-4)


class TestQuantile:
    def test_uniform(self):
        assert quantile(U(0, 2), 0.25) == pytest.approx(0.5, abs=1e-12)

    def test_exponential_median(self, oracle):
        d = AnalyticDistribution("exponential", rate=2.0)
        # truncating the 1e-8 upper tail moves the median by about 5e-9
        assert quantile(d, 0.5) == pytest.approx(oracle["exp2_median"], abs=1e-8)
        bis = sp_integrate.quad(lambda t: 2 * math.exp(-2 * t), 0, oracle["exp2_median"])[0]
        assert bis == pytest.approx(0.5, abs=1e-10)

    def test_zero_is_support_infimum(self):
        for d in (U(0.3, 2), AnalyticDistribution("normal", mean=1, sd=2),
                  GridDistribution([1.0, 2.0, 3.0], [0.0, 1.0, 0.0], interpolation="linear")):
            assert quantile(d, 0.0) == d.support[0]

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            quantile(U(0, 1), 1.5)
        with pytest.raises(OutOfRange):
            quantile(U(0, 1), -0.1)

    def test_left_continuous_on_flat_region(self):
        d = GridDistribution([0.0, 1.0, 1.0 + 1e-12, 2.0, 3.0], [1.0, 1.0, 0.0, 0.0, 0.0],
                             interpolation="linear")
        assert quantile(d, 1.0 - 1e-13) <= 1.0 + 1e-9

    def test_upper_tail_precision(self):
        d = AnalyticDistribution("normal", mean=0.0, sd=1.0)
        s = np.array([1e-7, 1e-5, 0.3])
        np.testing.assert_allclose(d.sf(d.quantile_upper(s)), s, rtol=1e-9)
        # the truncated law drops 1e-8 above its window
        assert d.quantile_upper(np.array([1e-7]))[0] == pytest.approx(stats.norm.isf(1.1e-7), rel=1e-8)


class TestExpectation:
    def test_uniform_mean(self):
        assert expectation(U(0, 1), lambda x: x) == pytest.approx(0.5, rel=1e-12)

    def test_lognormal_mean(self):
        d = AnalyticDistribution("lognormal", mu=0.0, sigma=0.2)
        assert expectation(d, lambda x: x) == pytest.approx(math.exp(0.02), rel=1e-7)

    def test_normalization(self):
        for d in (U(0, 1), AnalyticDistribution("lognormal", mu=1, sigma=0.5),
                  MixtureDistribution([(0.3, AnalyticDistribution("normal", mean=0, sd=1)),
                                       (0.7, AnalyticDistribution("normal", mean=4, sd=0.5))])):
            assert expectation(d, np.ones_like) == pytest.approx(1.0, abs=1e-9)


class TestFsd:
    def test_shifted(self):
        assert check_fsd(U(0, 1), U(0.5, 1.5), np.linspace(-1, 2, 301)).dominates

    def test_reflexive(self):
        rep = check_fsd(U(0, 1), U(0, 1), np.linspace(-1, 2, 301))
        assert rep.dominates and rep.max_violation == 0.0

    def test_not_dominating(self):
        assert not check_fsd(U(0, 1), U(0, 0.5), np.linspace(-1, 2, 301)).dominates

    def test_transitive(self):
        a, b, c = U(0, 1), U(0.2, 1.2), U(0.5, 1.6)
        g = np.linspace(-1, 2, 601)
        assert check_fsd(a, b, g).dominates and check_fsd(b, c, g).dominates
        assert check_fsd(a, c, g).dominates


class TestDensityEstimation:
    def test_uniform_sup_error(self):
        x = np.random.default_rng(7).uniform(size=100_000)
        d = estimate_density_from_samples(x)
        t = np.linspace(0.1, 0.9, 161)
        assert np.max(np.abs(d.pdf(t) - 1.0)) < 0.05

    def test_normal_median(self):
        x = np.random.default_rng(8).normal(size=100_000)
        d = estimate_density_from_samples(x)
        assert abs(d.cdf(np.array([0.0]))[0] - 0.5) < 0.01

    def test_constant_samples_degenerate(self):
        d = estimate_density_from_samples(np.full(50, 3.0))
        assert d.degenerate
        assert abs(d.mean() - 3.0) < 1e-4

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            estimate_density_from_samples(np.arange(29.0))


class TestAffineAndShape:
    def test_affine_moments(self):
        base = AnalyticDistribution("exponential", rate=1.0)
        d = AffineDistribution(base, 3.0, 7.0)
        assert d.mean() == pytest.approx(3 * base.mean() + 7, rel=1e-14)
        assert d.std() == pytest.approx(3 * base.std(), rel=1e-14)
        assert d.support == (7.0, 7.0 + 3 * base.support[1])

    def test_nonpositive_scale(self):
        with pytest.raises(NonPositiveScale):
            AffineDistribution(U(0, 1), 0.0)

    def test_unimodality(self):
        assert is_unimodal(AnalyticDistribution("lognormal", mu=0, sigma=0.4))
        bimodal = MixtureDistribution([(0.5, AnalyticDistribution("normal", mean=-3, sd=1)),
                                       (0.5, AnalyticDistribution("normal", mean=3, sd=1))])
        assert not is_unimodal(bimodal)

    def test_density_distribution_quantile_round_trip(self):
        d = DensityDistribution(lambda x: np.exp(-x) / (1 - math.exp(-5)), (0.0, 5.0))
        x = np.linspace(0.1, 4.9, 25)
        np.testing.assert_allclose(d.quantile(d.cdf(x)), x, atol=1e-9)


class TestLoading:
    def test_config_families(self):
        d = from_config({"family": "normal", "params": {"mean": 1.0, "sd": 2.0}})
        assert d.mean() == pytest.approx(1.0, abs=1e-9)
        d = from_config({"family": "uniform", "params": {"low": 0, "high": 1}, "scale": 2, "shift": 1})
        assert d.support == (1.0, 3.0)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            from_config({"params": {}})
        with pytest.raises(ConfigError):
            from_config({"family": "cauchy", "params": {}})

    def test_files(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("x,phi\n0,0\n0.5,2\n1,0\n")
        d = load_distribution(p, interpolation="linear")
        assert d.cdf(np.array([0.5]))[0] == pytest.approx(0.5)
        j = tmp_path / "d.json"
        j.write_text(json.dumps({"family": "exponential", "params": {"rate": 2.0}}))
        assert load_distribution(j).mean() == pytest.approx(0.5, rel=1e-6)

    def test_headerless_csv(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("0,1\n1,1\n")
        with pytest.raises(ConfigError):
            load_distribution(p)
