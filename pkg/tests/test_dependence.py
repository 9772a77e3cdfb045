import numpy as np
import pytest

from claytonmwd.copula import THETA_MIN, PairedSample, clayton_cdf, clayton_logpdf, sample_pairs, theta_tau_hat
from claytonmwd.estimation import dependence as dep
from claytonmwd.estimation.margins import EstimationError, InsufficientDataError
from claytonmwd.numerics import RngStream

from conftest import OMEGA1_S1 as O1, OMEGA2_S1 as O2


@pytest.fixture(scope="module")
def s200():
    return sample_pairs(O1, O2, 2.0, 200, RngStream(31))


class TestCopulaLikelihood:
    def test_sum_of_log_densities(self):
        u, v = np.random.default_rng(1).uniform(0.01, 0.99, (2, 40))
        assert dep.loglik_copula(2.5, u, v) == pytest.approx(np.sum(clayton_logpdf(2.5, u, v)), abs=1e-10)
        assert dep.loglik_copula(2.0, [0.5], [0.5]) == pytest.approx(float(clayton_logpdf(2.0, 0.5, 0.5)))

    def test_independence_value(self):
        u, v = np.random.default_rng(2).uniform(0.01, 0.99, (2, 40))
        assert abs(dep.loglik_copula(1e-6, u, v)) < 1e-3

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            dep.loglik_copula(2.0, [0.0, 0.5], [0.5, 0.5])

    def test_pseudo_observations_clamped(self):
        s = PairedSample([1e-9, 0.5, 50.0], [0.2, 1e-9, 50.0])
        u, v = dep.pseudo_observations(s, O1, O2)
        assert u.min() >= 1 / 6 and u.max() <= 1 - 1 / 6
        assert v.min() >= 1 / 6 and v.max() <= 1 - 1 / 6


class TestMleTheta:
    def test_grid_scan_oracle(self, s200):
        fit = dep.mle_theta(s200, O1, O2)
        u, v = dep.pseudo_observations(s200, O1, O2)
        grid = np.linspace(0.2, 6, 2901)
        ll = np.array([dep.loglik_copula(t, u, v) for t in grid])
        k = int(np.argmax(ll))
        assert 0 < k < grid.size - 1
        # single interior maximum: increasing before, decreasing after
        assert np.all(np.diff(ll[: k + 1]) > 0) and np.all(np.diff(ll[k:]) < 0)
        assert fit.theta == pytest.approx(grid[k], abs=2e-3)
        assert fit.converged and fit.theta_tau == pytest.approx(theta_tau_hat(s200))

    def test_analytic_gradient_consistent(self, s200):
        # the optimum is a stationary point of the log-likelihood
        fit = dep.mle_theta(s200, O1, O2)
        u, v = dep.pseudo_observations(s200, O1, O2)
        h = 1e-5
        d = (dep.loglik_copula(fit.theta + h, u, v) - dep.loglik_copula(fit.theta - h, u, v)) / (2 * h)
        assert abs(d) < 1e-4

    def test_large_sample(self):
        s = sample_pairs(O1, O2, 2.0, 10_000, RngStream(32))
        fit = dep.mle_theta(s, O1, O2)
        u, v = dep.pseudo_observations(s, O1, O2)
        h = 1e-3
        ll = [dep.loglik_copula(fit.theta + k * h, u, v) for k in (-1, 0, 1)]
        se = 1 / np.sqrt(-(ll[0] - 2 * ll[1] + ll[2]) / h ** 2)
        assert abs(fit.theta - 2.0) < 3 * se

    def test_independent_pairs_hit_lower_bound(self):
        s = sample_pairs(O1, O2, 2.0, 400, RngStream(33))
        y = np.random.default_rng(34).permutation(s.y)
        fit = dep.mle_theta(PairedSample(s.x, y), O1, O2)
        assert fit.theta < 0.05


class TestEmpiricalCdf:
    def test_values(self):
        s = PairedSample([1, 2], [1, 2])
        assert dep.empirical_bicdf(s, 1.5, 1.5) == 0.5
        assert dep.empirical_bicdf(s, 0.5, 5) == 0.0
        assert dep.empirical_bicdf(s, 2, 2) == 1.0

    def test_monotone(self, s200):
        q = np.linspace(0.01, 3, 50)
        hx = dep.empirical_bicdf(s200, q, np.full(50, 1.0))
        assert np.all(np.diff(hx) >= 0)
        np.testing.assert_allclose(hx * s200.n, np.round(hx * s200.n))


class TestLeastSquares:
    @pytest.mark.parametrize("weighted", [False, True])
    def test_large_sample(self, weighted):
        s = sample_pairs(O1, O2, 4.0, 10_000, RngStream(35))
        fit = dep.estimate_theta_ls(s, O1, O2, weighted)
        # the objective is flat in theta here: sd over seeds is about 0.35 at this n
        assert fit.theta == pytest.approx(4.0, abs=1.05)

    def test_minimizes_objective(self, s200):
        fit = dep.estimate_theta_ls(s200, O1, O2)
        u, v, h, w = dep._ls_setup(s200, O1, O2, False)
        grid = np.linspace(0.5, 8, 751)
        q = [np.sum((clayton_cdf(t, u, v) - h) ** 2) for t in grid]
        assert fit.objective <= min(q) + 1e-12

    def test_needs_three_pairs(self):
        with pytest.raises(InsufficientDataError):
            dep.estimate_theta_ls(PairedSample([1, 2], [1, 2]), O1, O2)


class TestOneStep:
    def test_fixed_point_when_gradient_vanishes(self, s200):
        u, v = dep.pseudo_observations(s200, O1, O2)
        t0 = 1.7
        b, c = dep.one_step_coefficients(t0, u, v, clayton_cdf(t0, u, v))
        assert b == 0.0 and c > 0
        assert t0 - b / (2 * c) == t0

    def test_reduces_objective(self, s200):
        u, v, h, w = dep._ls_setup(s200, O1, O2, False)
        one = dep.theta_one_step(s200, O1, O2)
        q = lambda t: np.sum((clayton_cdf(t, u, v) - h) ** 2)
        assert q(one.theta) <= q(one.theta_tau)

    def test_fallback(self, s200, monkeypatch):
        monkeypatch.setattr(dep, "one_step_coefficients", lambda *a, **k: (1.0, -1.0))
        fit = dep.theta_one_step(s200, O1, O2, weighted=True)
        assert fit.theta == fit.theta_tau and "fallback_to_theta_tau" in fit.flags

    def test_needs_positive_tau(self):
        s = PairedSample([1, 2, 3, 4], [4, 3, 2, 1])
        with pytest.raises(EstimationError):
            dep.theta_one_step(s, O1, O2)


class TestMps:
    def test_within_box(self, s200):
        fit = dep.mps_theta(s200, O1, O2)
        assert THETA_MIN <= fit.theta <= 1e4 and np.isfinite(fit.objective)

    def test_depends_only_on_order_statistics(self, s200):
        y = np.random.default_rng(36).permutation(s200.y)
        a = dep.mps_theta(s200, O1, O2)
        b = dep.mps_theta(PairedSample(s200.x, y), O1, O2)
        assert a.theta == pytest.approx(b.theta, rel=1e-6)

    @pytest.mark.xfail(strict=True, reason="the spacing objective built from separately sorted "
                       "pseudo-observations ignores the pairing, so its theta does not track the "
                       "generating value; the reference simulation mean is not reproduced")
    def test_reference_mean_at_theta_two(self):
        est = [dep.mps_theta(sample_pairs(O1, O2, 2.0, 100, RngStream(9).substream(k)), O1, O2).theta
               for k in range(200)]
        se = np.std(est, ddof=1) / np.sqrt(len(est))
        assert abs(np.mean(est) - 2.17539) < 3 * se
