import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from claytonmwd.margins import (
    MwdParams,
    mwd_cdf,
    mwd_logpdf,
    mwd_logsf,
    mwd_pdf,
    mwd_quantile,
    mwd_sample,
)
from claytonmwd.numerics import RngStream

from conftest import OMEGA1_S1, OMEGA1_S2, OMEGA2_S1, OMEGA2_S2

PARAMS = [OMEGA1_S1, OMEGA2_S1, OMEGA1_S2, OMEGA2_S2, MwdParams(0.02428, 0.45908, 6.33059),
          MwdParams(0.98577, 2.66112, 2.11279), MwdParams(3.0, 0.3, 0.05)]

positive = st.floats(0.05, 5.0)


class TestParams:
    @pytest.mark.parametrize("bad", [(0, 1, 1), (-1, 1, 1), (1, -0.1, 1), (1, 1, -0.1), (1, 0, 0), (np.nan, 1, 1)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            MwdParams(*bad)

    def test_array_round_trip(self):
        p = MwdParams(0.3, 1.2, 0.4)
        assert MwdParams.from_array(p.as_array()) == p


class TestDistribution:
    @pytest.mark.parametrize("p", PARAMS)
    def test_pdf_normalized(self, p):
        hi = float(mwd_quantile(p, 1 - 1e-15))
        total, _ = sp_integrate.quad(lambda x: float(mwd_pdf(p, x)), 0, hi, limit=400, epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("p", PARAMS)
    def test_pdf_is_cdf_derivative(self, p):
        x = np.linspace(0.05, 2.0, 9)
        h = 1e-6
        fd = (mwd_cdf(p, x + h) - mwd_cdf(p, x - h)) / (2 * h)
        np.testing.assert_allclose(mwd_pdf(p, x), fd, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("p", PARAMS)
    def test_quantile_round_trip(self, p):
        u = np.concatenate([np.logspace(-12, -1, 12), np.linspace(0.1, 0.9, 9), 1 - np.logspace(-1, -12, 12)])
        np.testing.assert_allclose(mwd_cdf(p, mwd_quantile(p, u)), u, rtol=1e-8, atol=1e-14)

    @given(a=positive, b=positive, lam=st.floats(0.0, 5.0), u=st.floats(1e-9, 1 - 1e-9))
    @settings(max_examples=200, deadline=None)
    def test_quantile_round_trip_property(self, a, b, lam, u):
        p = MwdParams(a, b, lam)
        assert float(mwd_cdf(p, mwd_quantile(p, u))) == pytest.approx(u, rel=1e-8, abs=1e-15)

    def test_weibull_reduction(self):
        a, b = 0.8, 1.7
        p = MwdParams(a, b, 0.0)
        ref = stats.weibull_min(c=b, scale=a ** (-1 / b))
        x = np.linspace(0.01, 4, 50)
        u = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(mwd_cdf(p, x), ref.cdf(x), rtol=1e-13)
        np.testing.assert_allclose(mwd_pdf(p, x), ref.pdf(x), rtol=1e-12)
        np.testing.assert_allclose(mwd_quantile(p, u), ref.ppf(u), rtol=1e-13)

    def test_exponential_special_case(self):
        p = MwdParams(2.0, 1.0, 0.0)
        x = np.linspace(0.1, 3, 10)
        np.testing.assert_allclose(mwd_logpdf(p, x), np.log(2) - 2 * x, rtol=1e-14)

    def test_b_zero_reduction(self):
        # F = 1 - exp(-a e^{lam x}); the mass 1 - e^{-a} sits at x = 0
        a, lam = 0.4, 1.3
        p = MwdParams(a, 0.0, lam)
        x = np.linspace(0.0, 3, 13)
        np.testing.assert_allclose(mwd_cdf(p, x), 1 - np.exp(-a * np.exp(lam * x)), rtol=1e-14)
        u = np.linspace(1 - np.exp(-a) + 0.01, 0.99, 9)
        np.testing.assert_allclose(mwd_quantile(p, u), np.log(-np.log1p(-u) / a) / lam, rtol=1e-13)
        assert np.all(mwd_quantile(p, [0.01, 0.2]) == 0.0)

    def test_support(self):
        p = OMEGA1_S1
        assert mwd_cdf(p, -1.0) == 0.0
        assert mwd_logsf(p, -1.0) == 0.0
        assert mwd_logpdf(p, -1.0) == -np.inf
        assert mwd_cdf(p, 50.0) == 1.0

    def test_far_tail_is_finite(self):
        p = OMEGA1_S1
        assert np.isfinite(mwd_logsf(p, 30.0)) and mwd_logsf(p, 30.0) < -1e6
        assert mwd_cdf(p, 1e-100) > 0

    def test_density_at_zero_rejected(self):
        with pytest.raises(ValueError):
            mwd_logpdf(OMEGA1_S1, [0.0, 1.0])

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, np.nan])
    def test_quantile_domain(self, u):
        with pytest.raises(ValueError):
            mwd_quantile(OMEGA1_S1, u)


class TestSampling:
    @pytest.mark.parametrize("p", [OMEGA1_S1, OMEGA2_S2])
    def test_ks(self, p):
        x = mwd_sample(p, 20_000, RngStream(3))
        assert stats.kstest(x, lambda t: mwd_cdf(p, t)).statistic < 0.015

    def test_reproducible(self):
        np.testing.assert_array_equal(mwd_sample(OMEGA1_S1, 10, RngStream(4)), mwd_sample(OMEGA1_S1, 10, RngStream(4)))

    def test_size(self):
        with pytest.raises(ValueError):
            mwd_sample(OMEGA1_S1, 0, RngStream(1))
