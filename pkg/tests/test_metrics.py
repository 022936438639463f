import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from spdval.distributions import AnalyticDistribution, GridDistribution
from spdval.errors import NotEquivalent
from spdval.metrics import MeasurePair, relative_entropy, symmetric_distance


def N(m, s=1.0):
    return AnalyticDistribution("normal", mean=m, sd=s)


@pytest.fixture
def linear():
    x = np.linspace(0.0, 1.0, 3)
    return GridDistribution(x, 2 * x, interpolation="linear")


class TestRelativeEntropy:
    def test_identical(self):
        assert relative_entropy(MeasurePair(N(0), N(0))) == 0.0
        assert relative_entropy(MeasurePair(N(0), N(0)), standard=True) == 0.0

    def test_gaussian_kl(self, oracle):
        assert relative_entropy(MeasurePair(N(0), N(1)), standard=True) == pytest.approx(
            oracle["gaussian_kl"], abs=1e-6)

    def test_gaussian_absolute_variant(self, oracle):
        assert relative_entropy(MeasurePair(N(0), N(1))) == pytest.approx(
            oracle["gaussian_abs_entropy"], abs=1e-6)

    def test_lognormal_kl(self):
        p = AnalyticDistribution("lognormal", mu=0.1, sigma=0.3)
        q = AnalyticDistribution("lognormal", mu=0.0, sigma=0.25)
        ref = sp_integrate.quad(
            lambda x: stats.norm.pdf(x, 0.1, 0.3) * (stats.norm.logpdf(x, 0.1, 0.3)
                                                     - stats.norm.logpdf(x, 0.0, 0.25)),
            -np.inf, np.inf, epsabs=1e-13)[0]
        assert relative_entropy(MeasurePair(p, q), standard=True) == pytest.approx(ref, abs=1e-7)

    def test_absolute_dominates_standard(self):
        pair = MeasurePair(N(0), N(0.5, 1.3))
        assert relative_entropy(pair) >= relative_entropy(pair, standard=True) >= 0

    def test_disjoint_supports(self):
        with pytest.raises(NotEquivalent):
            relative_entropy(MeasurePair(AnalyticDistribution("uniform", low=0, high=1),
                                         AnalyticDistribution("uniform", low=0.5, high=1.5)))


class TestSymmetricDistance:
    def test_identical(self):
        assert symmetric_distance(MeasurePair(N(0), N(0))) == 0.0

    def test_exact_symmetry(self):
        a = AnalyticDistribution("lognormal", mu=0.0, sigma=0.3)
        b = AnalyticDistribution("lognormal", mu=0.2, sigma=0.5)
        assert symmetric_distance(MeasurePair(a, b)) == symmetric_distance(MeasurePair(b, a))

    def test_uniform_vs_linear(self, linear, oracle):
        u = AnalyticDistribution("uniform", low=0, high=1)
        d = symmetric_distance(MeasurePair(u, linear))
        assert d == pytest.approx(oracle["uniform_linear_distance"], abs=1e-10)
        assert d == pytest.approx(oracle["uniform_linear_distance_riemann"], abs=1e-6)

    def test_harmonic_weight_bound(self):
        def min_weighted(x):
            lp, lq = stats.norm.logpdf(x, 0, 1), stats.norm.logpdf(x, 1, 1.5)
            return abs(lp - lq) * min(np.exp(lp), np.exp(lq))

        bound = sp_integrate.quad(min_weighted, -12, 14, points=[0.0, 1.0], limit=200)[0]
        assert symmetric_distance(MeasurePair(N(0), N(1, 1.5))) <= bound

    def test_positive_on_distinct(self):
        assert symmetric_distance(MeasurePair(N(0), N(0.1))) > 0
