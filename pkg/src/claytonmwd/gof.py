"""Marginal goodness-of-fit statistics, information criteria and correlation test."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import betainc

from .copula import PairedSample
from .estimation.margins import fit_margin, loglik_margin
from .margins import MwdParams, mwd_cdf, mwd_sample
from .numerics import NumericalError, RngStream

__all__ = [
    "Statistic",
    "Model",
    "GofReport",
    "ks_stat",
    "ad_stat",
    "cvm_stat",
    "gof_pvalue",
    "gof_pvalues",
    "aic_bic",
    "information_criteria",
    "pearson_test",
]

MAX_REFIT_FAILURE_RATE = 0.10
# random multi-starts per synthetic refit, on top of the warm start at the fitted values
REFIT_STARTS = 2


class Statistic(str, enum.Enum):
    KS = "KS"
    AD = "AD"
    CVM = "CVM"


class Model(str, enum.Enum):
    MWD = "MWD"
    WEIBULL = "WEIBULL"

    @property
    def estimator(self) -> str:
        return "mle" if self is Model.MWD else "weibull"

    @property
    def n_params(self) -> int:
        return 3 if self is Model.MWD else 2


@dataclass(frozen=True)
class GofReport:
    statistic_name: Statistic
    statistic: float
    p_value: float
    model: Model
    fitted: MwdParams
    B: int
    failures: int

    def to_dict(self) -> dict:
        return {
            "statistic_name": self.statistic_name.value,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "model": self.model.value,
            "fitted": {"a": self.fitted.a, "b": self.fitted.b, "lam": self.fitted.lam},
            "B": self.B,
            "failures": self.failures,
        }


def _pit(data, cdf: Callable) -> np.ndarray:
    x = np.sort(np.asarray(data, dtype=float).ravel())
    if x.size < 2:
        raise ValueError("goodness-of-fit statistics need n >= 2")
    u = np.asarray(cdf(x), dtype=float)
    eps = np.finfo(float).eps
    if np.any((u <= 0) | (u >= 1)):
        warnings.warn("model CDF hit 0 or 1 at some observations; clamping", RuntimeWarning, stacklevel=3)
        u = np.clip(u, eps, 1 - eps)
    return u


def ks_stat(data, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between the empirical and model CDFs."""
    u = _pit(data, cdf)
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def ad_stat(data, cdf: Callable) -> float:
    """Anderson-Darling ``A^2``."""
    u = _pit(data, cdf)
    n = u.size
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


def cvm_stat(data, cdf: Callable) -> float:
    """Cramer-von Mises ``W^2``."""
    u = _pit(data, cdf)
    n = u.size
    i = np.arange(1, n + 1)
    return float(1 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2))


_STATS = {Statistic.KS: ks_stat, Statistic.AD: ad_stat, Statistic.CVM: cvm_stat}


def _fit(data, model: Model, rng: RngStream, init=None, starts=None) -> MwdParams:
    kw = {} if starts is None else {"starts": starts}
    return fit_margin(data, model.estimator, rng=rng, init=init, **kw).params


def gof_pvalues(
    data,
    model: Model | str = Model.MWD,
    stats: Sequence[Statistic | str] = tuple(Statistic),
    B: int = 1000,
    rng: Optional[RngStream] = None,
    fitted: Optional[MwdParams] = None,
) -> list:
    """Statistics and parametric-bootstrap p-values sharing one set of replicates.

    Each replicate draws ``n`` values from the fitted model, refits the model
    by maximum likelihood and recomputes every statistic; the p-value is the
    fraction of replicate statistics at least as large as the observed one.
    """
    model = Model(model)
    stats = [Statistic(s) for s in stats]
    if B < 200:
        raise ValueError("B must be at least 200")
    x = np.asarray(data, dtype=float).ravel()
    rng = RngStream(0) if rng is None else rng
    p = fitted if fitted is not None else _fit(x, model, rng.substream(0))
    observed = {s: _STATS[s](x, lambda t: mwd_cdf(p, t)) for s in stats}
    boot = {s: [] for s in stats}
    failures = 0
    reps = rng.substream(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for b in range(B):
            st = reps.substream(b)
            xb = mwd_sample(p, x.size, st.substream(0))
            try:
                pb = _fit(xb, model, st.substream(1), init=[p], starts=REFIT_STARTS)
            except (NumericalError, ValueError):
                failures += 1
                continue
            for s in stats:
                boot[s].append(_STATS[s](xb, lambda t: mwd_cdf(pb, t)))
    if failures > MAX_REFIT_FAILURE_RATE * B:
        raise NumericalError(f"{failures} of {B} goodness-of-fit refits failed")
    out = []
    for s in stats:
        bs = np.asarray(boot[s])
        out.append(GofReport(s, observed[s], float(np.mean(bs >= observed[s])), model, p, B, failures))
    return out


def gof_pvalue(data, model: Model | str, stat: Statistic | str, B: int = 1000,
               rng: Optional[RngStream] = None) -> GofReport:
    return gof_pvalues(data, model, (stat,), B, rng)[0]


def aic_bic(loglik: float, k: int, n: int) -> tuple:
    """``(2k - 2 loglik, k log n - 2 loglik)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 * k - 2 * loglik, k * np.log(n) - 2 * loglik


def information_criteria(data, params: MwdParams, model: Model | str = Model.MWD) -> dict:
    model = Model(model)
    ll = loglik_margin(params, data)
    aic, bic = aic_bic(ll, model.n_params, np.size(data))
    return {"loglik": ll, "aic": aic, "bic": bic}


def pearson_test(s: PairedSample) -> tuple:
    """Sample correlation ``r``, ``t = r sqrt(n-2) / sqrt(1-r^2)`` and its two-sided p-value."""
    n = s.n
    if n < 3:
        raise ValueError("the correlation test needs n >= 3")
    dx, dy = s.x - s.x.mean(), s.y - s.y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance in one of the samples")
    r = float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1, 1))
    df = n - 2
    if abs(r) == 1:
        return r, float(np.copysign(np.inf, r)), 0.0
    t = r * np.sqrt(df) / np.sqrt(1 - r * r)
    # two-sided Student-t tail: I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2, 0.5, df / (df + t * t)))
    return r, float(t), p
