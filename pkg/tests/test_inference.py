import numpy as np
import pytest
from scipy.stats import norm

from claytonmwd.copula import sample_pairs
from claytonmwd.estimation.inference import (
    GodambeMatrix,
    IntervalEstimate,
    aci,
    godambe,
    observed_info,
    raw_loglik_margin,
    reliability_gradient,
)
from claytonmwd.estimation.pipeline import fit
from claytonmwd.margins import MwdParams, mwd_sample
from claytonmwd.numerics import RngStream

from conftest import setting1


@pytest.fixture(scope="module")
def fitted():
    m = setting1(2.0)
    s = sample_pairs(m.omega1, m.omega2, m.theta, 150, RngStream(51))
    return s, fit(s, "mle", RngStream(2))


def test_exponential_information():
    x = mwd_sample(MwdParams(2.0, 1.0, 0.0), 300, RngStream(52))
    a_hat = x.size / x.sum()
    info = observed_info(raw_loglik_margin(x), np.array([a_hat, 1.0, 0.0]))
    assert info[0, 0] == pytest.approx(x.size / a_hat**2, rel=1e-6)


def test_sandwich_matches_explicit_product(fitted):
    s, f = fitted
    g = godambe(s, f)
    d_inv = np.linalg.inv(g.neg_d)
    np.testing.assert_allclose(g.v, d_inv @ g.m @ d_inv.T, rtol=1e-7, atol=1e-12)


def test_marginal_block(fitted):
    s, f = fitted
    g = godambe(s, f)
    p = f.params.as_array()
    i1 = observed_info(raw_loglik_margin(s.x), p[:3])
    i2 = observed_info(raw_loglik_margin(s.y), p[3:6])
    np.testing.assert_allclose(g.v[:3, :3], np.linalg.inv(i1), rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(g.v[3:6, 3:6], np.linalg.inv(i2), rtol=1e-8, atol=1e-12)
    np.testing.assert_array_equal(g.v[:3, 3:6], 0)
    np.testing.assert_array_equal(g.v, g.v.T)
    assert np.all(np.diag(g.v) >= 0)


def test_only_for_mle(fitted):
    s, _ = fitted
    with pytest.raises(ValueError):
        godambe(s, fit(s, "lse", RngStream(2)))


def test_reliability_gradient_sign(fitted):
    _, f = fitted
    g = reliability_gradient(f.params)
    # larger theta pushes mass towards the diagonal; here R increases with theta
    assert g[6] > 0 and g.shape == (7,)


def test_intervals(fitted):
    s, f = fitted
    g = godambe(s, f)
    ivs = aci(f, g, 0.95)
    assert [iv.parameter for iv in ivs][-1] == "R" and len(ivs) == 8
    z = norm.ppf(0.975)
    assert z == pytest.approx(1.959964, abs=1e-6)
    th = ivs[6]
    assert th.upper - th.estimate == pytest.approx(z * np.sqrt(g.v[6, 6]), rel=1e-12)
    for iv in ivs:
        assert iv.lower >= 0 and iv.lower <= iv.estimate <= iv.upper
    assert ivs[-1].upper <= 1
    narrow = aci(f, g, 0.80)
    assert all(n.length <= w.length for n, w in zip(narrow, ivs))


def test_truncation(fitted):
    _, f = fitted
    big = GodambeMatrix(np.eye(7) * 100.0, np.eye(7), np.eye(7))
    ivs = aci(f, big)
    assert all(iv.lower == 0.0 for iv in ivs)
    assert ivs[-1].upper == 1.0


def test_interval_helpers():
    iv = IntervalEstimate("theta", 2.0, 1.0, 3.5, 0.95, "aci")
    assert iv.length == 2.5 and iv.covers(3.5) and not iv.covers(0.99)
    assert iv.to_dict()["kind"] == "aci"
    with pytest.raises(ValueError):
        aci(None, None, 1.5)
