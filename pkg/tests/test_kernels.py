import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdval import _kernels
from spdval._kernels import _pykernels
from spdval.distributions import antiderivative

needs_ext = pytest.mark.skipif(_kernels._ckernels is None, reason="compiled extension not built")


def _random_ppoly(rng, pieces, order=4):
    breaks = np.cumsum(rng.uniform(0.1, 1.0, pieces + 1))
    coef = rng.normal(size=(order, pieces))
    return breaks, coef


def _monotone_ppoly(rng, pieces):
    breaks = np.cumsum(rng.uniform(0.1, 1.0, pieces + 1))
    dens = np.vstack([np.zeros(pieces), rng.uniform(0.1, 2.0, pieces)])
    return breaks, antiderivative(breaks, dens)


class TestPythonKernels:
    """Reference behaviour of the numpy fallback."""

    def test_eval_matches_polyval(self):
        rng = np.random.default_rng(0)
        breaks, coef = _random_ppoly(rng, 5)
        x = np.linspace(breaks[0], breaks[-1], 101)
        idx = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, 4)
        expected = [np.polyval(coef[:, i], xi - breaks[i]) for xi, i in zip(x, idx)]
        np.testing.assert_allclose(_pykernels.ppoly_eval(breaks, coef, x), expected, rtol=1e-13, atol=1e-13)

    def test_derivative_order(self):
        rng = np.random.default_rng(1)
        breaks, coef = _random_ppoly(rng, 3)
        x = np.array([breaks[1] + 0.05])
        d = np.polyder(coef[:, 1])
        np.testing.assert_allclose(_pykernels.ppoly_eval(breaks, coef, x, 1),
                                   np.polyval(d, 0.05), rtol=1e-13)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(2)
        breaks, coef = _monotone_ppoly(rng, 8)
        x = np.linspace(breaks[0], breaks[-1], 57)
        y = _pykernels.ppoly_eval(breaks, coef, x)
        np.testing.assert_allclose(_pykernels.ppoly_inverse(breaks, coef, y), x, atol=1e-12)

    def test_kde_integrates_to_one(self):
        samples = np.sort(np.random.default_rng(3).normal(size=500))
        x = np.linspace(-6, 6, 4001)
        f = _pykernels.gauss_kde(samples, 0.3, x)
        assert abs(np.trapezoid(f, x) - 1.0) < 1e-6


@needs_ext
class TestBackendEquivalence:
    """The compiled kernels agree with the fallback."""

    @given(st.integers(0, 10_000), st.integers(1, 12), st.sampled_from([0, 1, 2]))
    def test_ppoly_eval(self, seed, pieces, nu):
        rng = np.random.default_rng(seed)
        breaks, coef = _random_ppoly(rng, pieces)
        x = rng.uniform(breaks[0] - 0.5, breaks[-1] + 0.5, 64)
        a = _pykernels.ppoly_eval(breaks, coef, x, nu)
        b = _kernels._ckernels.ppoly_eval(breaks, coef, x, nu)
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)

    @given(st.integers(0, 10_000), st.integers(1, 12))
    def test_ppoly_inverse(self, seed, pieces):
        rng = np.random.default_rng(seed)
        breaks, coef = _monotone_ppoly(rng, pieces)
        top = _pykernels.ppoly_eval(breaks, coef, breaks[-1:])[0]
        y = rng.uniform(-0.1, top + 0.1, 64)
        a = _pykernels.ppoly_inverse(breaks, coef, y)
        b = _kernels._ckernels.ppoly_inverse(breaks, coef, y)
        np.testing.assert_allclose(b, a, atol=1e-11 * (breaks[-1] - breaks[0]))

    @given(st.integers(0, 10_000), st.floats(0.05, 2.0))
    def test_gauss_kde(self, seed, bandwidth):
        rng = np.random.default_rng(seed)
        samples = np.sort(rng.normal(size=200))
        x = np.linspace(-5, 5, 301)
        a = _pykernels.gauss_kde(samples, bandwidth, x)
        b = _kernels._ckernels.gauss_kde(samples, bandwidth, x)
        np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-14)

    def test_backend_selected(self):
        assert _kernels.BACKEND in ("cython", "python")
