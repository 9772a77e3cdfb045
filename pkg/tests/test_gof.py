import numpy as np
import pytest
from scipy import integrate, stats

from claytonmwd.copula import PairedSample
from claytonmwd.gof import (
    Model,
    Statistic,
    ad_stat,
    aic_bic,
    cvm_stat,
    gof_pvalue,
    gof_pvalues,
    information_criteria,
    ks_stat,
    pearson_test,
)
from claytonmwd.margins import MwdParams, mwd_cdf, mwd_sample
from claytonmwd.numerics import RngStream

P = MwdParams(0.75, 1.25, 0.6)


@pytest.fixture(scope="module")
def data():
    return mwd_sample(P, 60, RngStream(71))


def cdf(t):
    return mwd_cdf(P, t)


def test_ks_against_scipy(data):
    assert ks_stat(data, cdf) == pytest.approx(stats.kstest(data, cdf).statistic, abs=1e-14)


def test_cvm_against_scipy(data):
    assert cvm_stat(data, cdf) == pytest.approx(stats.cramervonmises(data, cdf).statistic, abs=1e-12)


def test_ad_against_integral_definition(data):
    # A^2 = n * int (F_n - F)^2 / (F (1 - F)) dF, integrated piecewise in u
    u = np.sort(cdf(data))
    n = u.size
    knots = np.concatenate([[0.0], u, [1.0]])
    total = 0.0
    for k in range(n + 1):
        fn = k / n
        val, _ = integrate.quad(lambda t: (fn - t) ** 2 / (t * (1 - t)), knots[k], knots[k + 1])
        total += val
    assert ad_stat(data, cdf) == pytest.approx(n * total, rel=1e-8)


def test_cvm_minimum():
    n = 10
    u = (2 * np.arange(1, n + 1) - 1) / (2 * n)
    assert cvm_stat(u, lambda t: t) == pytest.approx(1 / (12 * n), abs=1e-15)


def test_clamps_with_warning():
    with pytest.warns(RuntimeWarning):
        assert np.isfinite(ad_stat([0.0, 0.5, 1.0], lambda t: np.asarray(t)))


def test_aic_bic():
    assert aic_bic(0.0, 1, 1) == (2.0, 0.0)
    aic, bic = aic_bic(-10.0, 3, 95)
    assert aic == 26.0 and bic == pytest.approx(3 * np.log(95) + 20)


@pytest.mark.parametrize("aic,bic,k", [(-73.69488, -66.03325, 3), (-74.53015, -69.42240, 2),
                                       (-68.45257, -60.79094, 3), (-49.26487, -44.15712, 2)])
def test_reported_criteria_consistent_with_sample_size(aic, bic, k):
    # both criteria imply the same log-likelihood at n = 95
    ll = (2 * k - aic) / 2
    assert k * np.log(95) - 2 * ll == pytest.approx(bic, abs=1e-4)


def test_information_criteria(data):
    ic = information_criteria(data, P)
    assert ic["aic"] == pytest.approx(6 - 2 * ic["loglik"])
    assert information_criteria(data, P, "WEIBULL")["bic"] == pytest.approx(2 * np.log(60) - 2 * ic["loglik"])


def test_pearson_against_scipy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    y = 0.5 * x + rng.normal(size=40)
    r, t, p = pearson_test(PairedSample(np.exp(x), np.exp(y)))
    ref = stats.pearsonr(np.exp(x), np.exp(y))
    assert r == pytest.approx(ref.statistic, abs=1e-12) and p == pytest.approx(ref.pvalue, rel=1e-9)
    assert t == pytest.approx(r * np.sqrt(38) / np.sqrt(1 - r * r))


def test_pvalues_well_specified(data):
    reps = gof_pvalues(data, Model.WEIBULL, B=200, rng=RngStream(5))
    assert [r.statistic_name for r in reps] == list(Statistic)
    assert all(0.0 <= r.p_value <= 1.0 for r in reps) and all(r.failures == 0 for r in reps)
    same = gof_pvalue(data, "WEIBULL", "KS", B=200, rng=RngStream(5))
    assert same.p_value == reps[0].p_value and same.to_dict()["model"] == "WEIBULL"


def test_pvalue_detects_misfit():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.uniform(0.1, 0.2, 50), rng.uniform(5, 6, 50)])
    (rep,) = gof_pvalues(x, "MWD", ("AD",), B=200, rng=RngStream(6))
    assert rep.p_value < 0.01


def test_b_too_small(data):
    with pytest.raises(ValueError):
        gof_pvalues(data, B=100)
