"""Asymptotic inference for the two-step MLE: Godambe sandwich and Wald intervals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm

from ..copula import THETA_MIN, PairedSample, _log_s
from ..numerics import NumericalError, numeric_gradient, numeric_hessian
from ..reliability import PARAMETER_NAMES, ModelParams, reliability_exact
from .pipeline import FitResult, Method

__all__ = [
    "IntervalEstimate",
    "GodambeMatrix",
    "observed_info",
    "raw_loglik_margin",
    "raw_loglik_copula",
    "godambe",
    "aci",
    "reliability_gradient",
]


@dataclass(frozen=True)
class IntervalEstimate:
    parameter: str
    estimate: float
    lower: float
    upper: float
    level: float
    kind: str

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class GodambeMatrix:
    """Sandwich covariance ``V = (-D)^-1 M (-D)^-T`` and its ingredients.

    ``neg_d`` is the 7x7 block lower-triangular sensitivity matrix with
    marginal information blocks ``I1``, ``I2`` on the diagonal and the
    cross-derivative row of the copula log-likelihood at the bottom;
    ``m`` is ``blockdiag(I1, I2, I33)``.
    """

    v: np.ndarray
    neg_d: np.ndarray
    m: np.ndarray

    @property
    def i1(self) -> np.ndarray:
        return self.neg_d[:3, :3]

    @property
    def i2(self) -> np.ndarray:
        return self.neg_d[3:6, 3:6]


def observed_info(objective: Callable[[np.ndarray], float], at, steps=None) -> np.ndarray:
    """Negated numerical Hessian of a log-likelihood at ``at``."""
    return -numeric_hessian(objective, at, steps)


def raw_loglik_margin(x: np.ndarray) -> Callable[[np.ndarray], float]:
    """MWD log-likelihood as a function of an unconstrained ``(a, b, lam)`` vector.

    No parameter validation, so finite-difference stencils may step
    slightly outside the parameter space near a boundary.
    """
    x = np.asarray(x, dtype=float)
    n, logx = x.size, np.log(x)
    slog, sx = logx.sum(), x.sum()

    def ll(p):
        a, b, lam = p
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            return float(
                n * np.log(a) + np.sum(np.log(b + lam * x)) + (b - 1) * slog + lam * sx
                - a * np.sum(np.exp(b * logx + lam * x))
            )

    return ll


def _raw_cdf(p, x, logx):
    a, b, lam = p
    return -np.expm1(-a * np.exp(b * logx + lam * x))


def raw_loglik_copula(s: PairedSample) -> Callable[[np.ndarray], float]:
    """Copula log-likelihood as a function of all seven parameters.

    Margins enter through clamped pseudo-observations, as in the fit.
    """
    lx, ly = np.log(s.x), np.log(s.y)
    n = s.n
    lo = 1 / (2 * n)

    def ll(p):
        p = np.asarray(p, dtype=float)
        t = p[6]
        with np.errstate(all="ignore"):
            u = np.clip(_raw_cdf(p[:3], s.x, lx), lo, 1 - lo)
            v = np.clip(_raw_cdf(p[3:6], s.y, ly), lo, 1 - lo)
            lu, lv = np.log(u), np.log(v)
            return float(n * np.log1p(t) - (1 + t) * np.sum(lu + lv) - (1 / t + 2) * np.sum(_log_s(t, lu, lv)))

    return ll


def godambe(s: PairedSample, fit: FitResult) -> GodambeMatrix:
    """Sandwich covariance of the two-step MLE at ``fit``.

    Raises ``NumericalError`` when a marginal information block or the
    copula curvature is not positive (flat or boundary likelihood).
    """
    if fit.method is not Method.MLE:
        raise ValueError("the Godambe sandwich applies to the two-step MLE only")
    p = fit.params.as_array()
    i1 = observed_info(raw_loglik_margin(s.x), p[:3])
    i2 = observed_info(raw_loglik_margin(s.y), p[3:6])
    h3 = observed_info(raw_loglik_copula(s), p)
    c, d = h3[6, :6], h3[6, 6]
    a = np.zeros((6, 6))
    a[:3, :3], a[3:, 3:] = i1, i2
    if not d > 0:
        raise NumericalError(f"copula information {d:.3g} is not positive")
    try:
        a_inv = np.linalg.inv(a)
        np.linalg.cholesky(i1)
        np.linalg.cholesky(i2)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular or indefinite marginal information: {exc}") from exc
    # closed-form block inverse of the lower-triangular -D keeps the 6x6 block exact
    a_inv = 0.5 * (a_inv + a_inv.T)
    cross = -(c @ a_inv) / d
    v = np.empty((7, 7))
    v[:6, :6] = a_inv
    v[6, :6] = v[:6, 6] = cross
    v[6, 6] = (c @ a_inv @ c + d) / d**2
    neg_d = np.zeros((7, 7))
    neg_d[:6, :6] = a
    neg_d[6, :6], neg_d[6, 6] = c, d
    m = np.zeros((7, 7))
    m[:6, :6] = a
    m[6, 6] = d
    return GodambeMatrix(v, neg_d, m)


_R_LOWER = np.array([np.finfo(float).tiny, 0, 0, np.finfo(float).tiny, 0, 0, THETA_MIN])


def reliability_gradient(params: ModelParams) -> np.ndarray:
    """Finite-difference gradient of ``R`` over the seven parameters.

    Quadrature tolerances are tightened so differencing noise stays below
    the truncation error of the stencil.
    """
    def r(v):
        return reliability_exact(ModelParams.from_array(v), abs_tol=1e-12, rel_tol=1e-10)

    return numeric_gradient(r, params.as_array(), lower=_R_LOWER)


def aci(fit: FitResult, g: GodambeMatrix, level: float = 0.95) -> list:
    """Wald intervals for the seven parameters and ``R`` (delta method).

    The lower ends of the positive parameters are truncated at 0 and the
    ``R`` interval is truncated to ``[0, 1]``.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    z = norm.ppf(0.5 + level / 2)
    var = np.diag(g.v).copy()
    grad = reliability_gradient(fit.params)
    var_r = float(grad @ g.v @ grad)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(g.v))))
    for name, vv in [*zip(PARAMETER_NAMES, var), ("R", var_r)]:
        if vv < -tol:
            raise NumericalError(f"negative variance estimate for {name}: {vv:.3g}")
    est = fit.estimates()
    out = []
    for i, name in enumerate((*PARAMETER_NAMES, "R")):
        half = z * np.sqrt(max(var[i] if i < 7 else var_r, 0.0))
        lo, hi = est[i] - half, est[i] + half
        lo = max(lo, 0.0)
        if name == "R":
            hi = min(hi, 1.0)
        out.append(IntervalEstimate(name, float(est[i]), float(lo), float(hi), level, "aci"))
    return out
