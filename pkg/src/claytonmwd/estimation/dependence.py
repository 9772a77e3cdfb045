"""Second-stage estimators of the Clayton parameter given fitted margins."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..copula import (
    THETA_MAX,
    THETA_MIN,
    PairedSample,
    _log_s,
    clayton_cdf,
    clayton_cdf_theta_derivatives,
    clayton_logpdf,
    kendall_tau_hat,
    theta_from_tau,
)
from ..margins import MwdParams, mwd_cdf
from ..numerics import NumericalError, minimize_bounded
from .margins import EstimationError, InsufficientDataError, wlse_weights

__all__ = [
    "ThetaFit",
    "pseudo_observations",
    "loglik_copula",
    "mle_theta",
    "empirical_bicdf",
    "estimate_theta_ls",
    "one_step_coefficients",
    "theta_one_step",
    "mps_theta",
]


@dataclass(frozen=True)
class ThetaFit:
    theta: float
    objective: float
    converged: bool
    theta_tau: Optional[float]
    flags: tuple = ()

    def diagnostics(self) -> dict:
        return {
            "theta": self.theta,
            "objective": self.objective,
            "converged": self.converged,
            "theta_tau": self.theta_tau,
            "flags": list(self.flags),
        }


def pseudo_observations(s: PairedSample, omega1: MwdParams, omega2: MwdParams):
    """``u = F(x)``, ``v = G(y)`` clamped to ``[1/(2n), 1 - 1/(2n)]``."""
    lo = 1 / (2 * s.n)
    u = np.clip(mwd_cdf(omega1, s.x), lo, 1 - lo)
    v = np.clip(mwd_cdf(omega2, s.y), lo, 1 - lo)
    return u, v


def _tau_start(s: PairedSample):
    tau = kendall_tau_hat(s)
    try:
        th = theta_from_tau(tau)
    except ValueError:
        return None
    return float(th)


def _box_start(th: Optional[float], fallback: float = 0.5) -> float:
    if th is None:
        return fallback
    return float(np.clip(th, THETA_MIN, THETA_MAX))


def loglik_copula(theta: float, u, v) -> float:
    """Sum of Clayton log-densities at pseudo-observations strictly inside (0, 1)."""
    return float(np.sum(clayton_logpdf(theta, u, v)))


def _minimize_theta(fun, jac, start) -> tuple:
    res = minimize_bounded(fun, [start], [THETA_MIN], [THETA_MAX], jac=jac)
    return float(res.argmin[0]), float(res.objective_value), res.converged


def mle_theta(s: PairedSample, omega1: MwdParams, omega2: MwdParams) -> ThetaFit:
    """Maximize the copula log-likelihood over theta, started at the tau-inversion value."""
    u, v = pseudo_observations(s, omega1, omega2)
    lu, lv = np.log(u), np.log(v)
    n = s.n
    slog = float(np.sum(lu + lv))

    def fun(p):
        t = p[0]
        return -(n * np.log1p(t) - (1 + t) * slog - (1 / t + 2) * np.sum(_log_s(t, lu, lv)))

    def jac(p):
        t = p[0]
        ls = _log_s(t, lu, lv)
        ratio = -(np.exp(-t * lu - ls) * lu + np.exp(-t * lv - ls) * lv)  # S'/S
        g = n / (1 + t) - slog + np.sum(ls) / t**2 - (1 / t + 2) * np.sum(ratio)
        return np.array([-g])

    th_tau = _tau_start(s)
    flags = () if th_tau is not None else ("tau_nonpositive_start",)
    try:
        theta, obj, conv = _minimize_theta(fun, jac, _box_start(th_tau))
    except NumericalError as exc:
        raise EstimationError(f"copula MLE failed (tau-inversion fallback {th_tau}): {exc}") from exc
    if theta <= THETA_MIN * 1.0001:
        flags += ("theta_at_lower_bound",)
    return ThetaFit(theta, -obj, conv, th_tau, flags)


def empirical_bicdf(s: PairedSample, x, y) -> np.ndarray:
    """``H_n(x, y) = (1/n) #{j : X_j <= x, Y_j <= y}`` at each query point."""
    xq = np.atleast_1d(np.asarray(x, dtype=float))
    yq = np.atleast_1d(np.asarray(y, dtype=float))
    xq, yq = np.broadcast_arrays(xq, yq)
    out = np.empty(xq.shape, dtype=float)
    flat_x, flat_y, flat_o = xq.ravel(), yq.ravel(), out.reshape(-1)
    chunk = max(1, 4_000_000 // s.n)
    for i in range(0, flat_x.size, chunk):
        sl = slice(i, i + chunk)
        hit = (s.x[None, :] <= flat_x[sl, None]) & (s.y[None, :] <= flat_y[sl, None])
        flat_o[sl] = hit.sum(axis=1) / s.n
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return out.reshape(())[()]
    return out


def _ls_setup(s: PairedSample, omega1, omega2, weighted: bool):
    if s.n < 3:
        raise InsufficientDataError("least-squares copula fit needs n >= 3")
    u, v = pseudo_observations(s, omega1, omega2)
    h = empirical_bicdf(s, s.x, s.y)
    if weighted:
        # weight i goes to the pair holding rank i of the empirical joint CDF
        order = np.argsort(h, kind="stable")
        w = np.empty(s.n)
        w[order] = wlse_weights(s.n)
    else:
        w = np.ones(s.n)
    return u, v, h, w


def estimate_theta_ls(s: PairedSample, omega1: MwdParams, omega2: MwdParams, weighted: bool = False) -> ThetaFit:
    """Minimize ``sum w_i (C(u_i, v_i) - H_n(x_i, y_i))^2`` over theta."""
    u, v, h, w = _ls_setup(s, omega1, omega2, weighted)

    def fun(p):
        r = clayton_cdf(p[0], u, v) - h
        return float(np.dot(w, r * r))

    def jac(p):
        c, dc, _ = clayton_cdf_theta_derivatives(p[0], u, v)
        return np.array([2 * np.dot(w, (c - h) * dc)])

    th_tau = _tau_start(s)
    flags = () if th_tau is not None else ("tau_nonpositive_start",)
    try:
        theta, obj, conv = _minimize_theta(fun, jac, _box_start(th_tau))
    except NumericalError as exc:
        raise EstimationError(f"least-squares copula fit failed: {exc}") from exc
    if theta >= THETA_MAX * 0.9999:
        flags += ("theta_at_upper_bound",)
    return ThetaFit(theta, obj, conv, th_tau, flags)


def one_step_coefficients(theta0: float, u, v, h, w=None):
    """Quadratic-model coefficients ``(B, C)`` of the least-squares objective at ``theta0``."""
    c, dc, ddc = clayton_cdf_theta_derivatives(theta0, u, v)
    w = np.ones_like(c) if w is None else np.asarray(w, dtype=float)
    r = c - h
    return float(2 * np.sum(w * dc * r)), float(np.sum(w * (dc * dc + r * ddc)))


def theta_one_step(s: PairedSample, omega1: MwdParams, omega2: MwdParams, weighted: bool = False) -> ThetaFit:
    """One Newton step on the (weighted) least-squares objective from the tau estimate.

    ``theta = theta_tau - B / (2 C)``. When the quadratic model is not convex
    (``C <= 0``) or the step leaves ``(0, THETA_MAX]`` the tau estimate is
    returned with a flag.
    """
    u, v, h, w = _ls_setup(s, omega1, omega2, weighted)
    th_tau = _tau_start(s)
    if th_tau is None:
        raise EstimationError("one-step estimator needs a positive sample Kendall tau")
    t0 = min(th_tau, THETA_MAX)
    B, C = one_step_coefficients(t0, u, v, h, w)
    flags = ()
    theta = t0 - B / (2 * C) if C > 0 else np.nan
    if not (np.isfinite(theta) and 0 < theta <= THETA_MAX):
        flags = ("fallback_to_theta_tau",)
        theta = t0
    r = clayton_cdf(theta, u, v) - h
    return ThetaFit(float(theta), float(np.dot(w, r * r)), True, th_tau, flags)


def mps_theta(s: PairedSample, omega1: MwdParams, omega2: MwdParams) -> ThetaFit:
    """Maximize the mean log copula spacing along the sorted margins.

    ``D_i = C(F(x_(i)), G(y_(i))) - C(F(x_(i-1)), G(y_(i-1)))`` with the
    conventions ``C(0, 0) = 0`` and ``C(1, 1) = 1``.
    """
    tiny = np.finfo(float).tiny
    u = np.clip(mwd_cdf(omega1, np.sort(s.x)), tiny, 1.0)
    v = np.clip(mwd_cdf(omega2, np.sort(s.y)), tiny, 1.0)
    n = s.n

    def spacings(t):
        c, dc, _ = clayton_cdf_theta_derivatives(t, u, v)
        cc = np.concatenate([[0.0], c, [1.0]])
        dd = np.concatenate([[0.0], dc, [0.0]])
        return np.diff(cc), np.diff(dd)

    def fun(p):
        d, _ = spacings(p[0])
        if np.any(d <= 0):
            return np.inf
        return float(-np.mean(np.log(d)))

    def jac(p):
        d, dd = spacings(p[0])
        return np.array([-np.sum(dd / d) / (n + 1)])

    th_tau = _tau_start(s)
    flags = () if th_tau is not None else ("tau_nonpositive_start",)
    start = _box_start(th_tau)
    if not np.isfinite(fun([start])):
        raise EstimationError("zero copula spacing at the starting value")
    try:
        theta, obj, conv = _minimize_theta(fun, jac, start)
    except NumericalError as exc:
        raise EstimationError(f"MPS copula fit failed: {exc}") from exc
    return ThetaFit(theta, -obj, conv, th_tau, flags)
