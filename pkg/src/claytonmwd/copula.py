"""Bivariate Clayton copula and dependent pair sampling.

``C(u, v) = (u^-t + v^-t - 1)^(-1/t)`` for ``t > 0``. The generator sum
``S = u^-t + v^-t - 1`` is handled through its logarithm so that large
``t`` (or tiny ``u``) does not overflow and ``t -> 0`` does not cancel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .margins import MwdParams, mwd_quantile
from .numerics import RngStream

__all__ = [
    "THETA_MIN",
    "THETA_MAX",
    "PairedSample",
    "check_theta",
    "clayton_cdf",
    "clayton_logpdf",
    "clayton_pdf",
    "clayton_h",
    "clayton_h_inv",
    "clayton_cdf_theta_derivatives",
    "tau_from_theta",
    "theta_from_tau",
    "kendall_tau_hat",
    "theta_tau_hat",
    "sample_pairs",
]

THETA_MIN = 1e-6
THETA_MAX = 1e4


@dataclass(frozen=True)
class PairedSample:
    """``n`` observed (strength, stress) pairs."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError(f"x and y differ in length ({x.size} vs {y.size})")
        if x.size < 2:
            raise ValueError(f"a paired sample needs n >= 2, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("paired sample contains non-finite values")
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("all observations must be strictly positive")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError(f"Clayton requires theta > 0, got {theta}")
    return theta


def _log_expm1(z):
    """``log(e^z - 1)`` for ``z >= 0`` without overflow."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        big = z > 30
        return np.where(big, z + np.log1p(-np.exp(-np.where(big, z, 30.0))),
                        np.log(np.expm1(np.where(big, 1.0, z))))


def _log_s(theta, logu, logv):
    """``log(u^-t + v^-t - 1)`` from ``log u``, ``log v`` (both finite, <= 0)."""
    a = -theta * logu
    b = -theta * logv
    m = np.maximum(a, b)
    small = m < 30
    with np.errstate(over="ignore"):
        lin = np.log1p(np.expm1(np.where(small, a, 0.0)) + np.expm1(np.where(small, b, 0.0)))
        mb = np.where(small, 30.0, m)
        big = mb + np.log(np.exp(a - mb) + np.exp(b - mb) - np.exp(-mb))
    return np.where(small, lin, big)


def clayton_cdf(theta: float, u, v) -> np.ndarray:
    theta = check_theta(theta)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise ValueError("clayton_cdf requires u, v in [0, 1]")
    zero = (u == 0) | (v == 0)
    us = np.where(zero, 0.5, u)
    vs = np.where(zero, 0.5, v)
    out = np.exp(-_log_s(theta, np.log(us), np.log(vs)) / theta)
    return np.where(zero, 0.0, out)


def clayton_logpdf(theta: float, u, v) -> np.ndarray:
    theta = check_theta(theta)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
        raise ValueError("clayton density requires u, v strictly inside (0, 1)")
    lu, lv = np.log(u), np.log(v)
    return np.log1p(theta) - (1 + theta) * (lu + lv) - (1 / theta + 2) * _log_s(theta, lu, lv)


def clayton_pdf(theta: float, u, v) -> np.ndarray:
    return np.exp(clayton_logpdf(theta, u, v))


def clayton_h(theta: float, u, v) -> np.ndarray:
    """Conditional CDF ``dC/du`` of ``V`` given ``U = u``.

    Uses ``(1 + u^t (v^-t - 1))^-(1 + 1/t)``, algebraically equal to
    ``u^-(t+1) S^-(1/t + 1)`` but bounded at both ends of ``v``.
    """
    theta = check_theta(theta)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("clayton_h requires u strictly inside (0, 1)")
    if np.any((v < 0) | (v > 1)):
        raise ValueError("clayton_h requires v in [0, 1]")
    with np.errstate(divide="ignore"):
        z = theta * np.log(u) + _log_expm1(-theta * np.log(v))
    return np.exp(-(1 + 1 / theta) * np.logaddexp(0.0, z))


def clayton_h_inv(theta: float, u, w) -> np.ndarray:
    """Inverse of :func:`clayton_h` in its second argument (closed form)."""
    theta = check_theta(theta)
    u, w = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(w, dtype=float))
    if np.any((u <= 0) | (u >= 1) | (w <= 0) | (w >= 1)):
        raise ValueError("clayton_h_inv requires u, w strictly inside (0, 1)")
    z = -theta * np.log(u) + _log_expm1(-theta / (1 + theta) * np.log(w))
    return np.exp(-np.logaddexp(0.0, z) / theta)


def clayton_cdf_theta_derivatives(theta: float, u, v):
    """``C``, ``dC/dt`` and ``d2C/dt2`` at interior points ``(u, v)``.

    With ``S' = dS/dt = -u^-t log u - v^-t log v`` and
    ``S'' = u^-t (log u)^2 + v^-t (log v)^2``:

        d1  = log S / t^2 - S' / (t S)
        d1' = -2 log S / t^3 + 2 S' / (t^2 S) + S'^2 / (t S^2) - S'' / (t S)
        dC  = C d1,   d2C = C (d1^2 + d1')
    """
    theta = check_theta(theta)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    lu, lv = np.log(u), np.log(v)
    log_s = _log_s(theta, lu, lv)
    # ratios u^-t / S and v^-t / S
    ru = np.exp(-theta * lu - log_s)
    rv = np.exp(-theta * lv - log_s)
    sp = -(ru * lu + rv * lv)  # S'/S
    spp = ru * lu**2 + rv * lv**2  # S''/S
    c = np.exp(-log_s / theta)
    d1 = log_s / theta**2 - sp / theta
    dd1 = -2 * log_s / theta**3 + 2 * sp / theta**2 + sp**2 / theta - spp / theta
    return c, c * d1, c * (d1**2 + dd1)


def tau_from_theta(theta: float) -> float:
    theta = check_theta(theta)
    return theta / (theta + 2)


def theta_from_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"Kendall tau = {tau:.6g} <= 0: the Clayton copula needs positive concordance")
    if not tau < 1:
        raise ValueError(f"Kendall tau = {tau:.6g} >= 1: theta is infinite (perfect concordance)")
    return 2 * tau / (1 - tau)


def _concordance_sum_pairs(x, y) -> float:
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    return float(np.triu(dx * dy, k=1).sum())


def kendall_tau_hat(s: PairedSample) -> float:
    """``(concordant - discordant) / C(n, 2)``; ties count as neither.

    Direct pair enumeration up to ``n = 1000``; above that the concordance
    count is recovered exactly from scipy's tau-b and its tie corrections.
    """
    n = s.n
    n0 = n * (n - 1) / 2
    if n <= 1000:
        return _concordance_sum_pairs(s.x, s.y) / n0
    res = stats.kendalltau(s.x, s.y, variant="b")

    def ties(a):
        _, counts = np.unique(a, return_counts=True)
        return float(np.sum(counts * (counts - 1) / 2))

    denom = np.sqrt((n0 - ties(s.x)) * (n0 - ties(s.y)))
    return float(res.statistic) * denom / n0


def theta_tau_hat(s: PairedSample) -> float:
    """Moment estimator ``2 tau / (1 - tau)`` from the sample Kendall tau."""
    return theta_from_tau(kendall_tau_hat(s))


def sample_pairs(
    omega1: MwdParams, omega2: MwdParams, theta: float, n: int, rng: RngStream
) -> PairedSample:
    """Dependent (strength, stress) pairs by conditional inversion.

    ``u, w ~ U(0,1)``; ``v = h^-1(w | u)``; ``x = F^-1(u)``, ``y = G^-1(v)``.
    """
    theta = check_theta(theta)
    if n < 1:
        raise ValueError("sample size must be >= 1")
    u = rng.uniform(n)
    w = rng.uniform(n)
    v = np.clip(clayton_h_inv(theta, u, w), 2.0**-1074, 1 - 2.0**-53)
    return PairedSample(mwd_quantile(omega1, u), mwd_quantile(omega2, v))
