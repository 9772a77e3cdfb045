"""End-to-end two-step fits: margins first, then theta, then ``R``."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..copula import PairedSample
from ..numerics import NumericalError, RngStream
from ..reliability import ModelParams, reliability_exact
from . import dependence as dep
from .margins import DEFAULT_STARTS, InsufficientDataError, fit_margin

__all__ = ["Method", "FitResult", "fit", "fit_many", "fit_mle"]


class Method(str, enum.Enum):
    MLE = "mle"
    LSE = "lse"
    LSE1 = "lse1"
    WLSE = "wlse"
    WLSE1 = "wlse1"
    MPS = "mps"

    @property
    def family(self) -> str:
        """Margin estimator shared by this method."""
        return {"lse1": "lse", "wlse1": "wlse"}.get(self.value, self.value)


_FAMILY_STREAM = {"mle": 0, "lse": 1, "wlse": 2, "mps": 3}


@dataclass(frozen=True)
class FitResult:
    method: Method
    params: ModelParams
    r_hat: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def theta(self) -> float:
        return self.params.theta

    def estimates(self) -> np.ndarray:
        """``(a1, b1, lam1, a2, b2, lam2, theta, R)``."""
        return np.append(self.params.as_array(), self.r_hat)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "estimates": {**self.params.as_dict(), "R": self.r_hat},
            "diagnostics": self.diagnostics,
        }


def _theta_step(method: Method, s, o1, o2) -> dep.ThetaFit:
    if method is Method.MLE:
        return dep.mle_theta(s, o1, o2)
    if method is Method.MPS:
        return dep.mps_theta(s, o1, o2)
    weighted = method in (Method.WLSE, Method.WLSE1)
    if method in (Method.LSE1, Method.WLSE1):
        return dep.theta_one_step(s, o1, o2, weighted)
    return dep.estimate_theta_ls(s, o1, o2, weighted)


def _fit_margins(s: PairedSample, family: str, rng: RngStream, starts: int, init) -> tuple:
    sub = rng.substream(_FAMILY_STREAM[family])
    i1, i2 = (None, None) if init is None else ([init.omega1], [init.omega2])
    f1 = fit_margin(s.x, family, starts, sub.substream(0), i1)
    f2 = fit_margin(s.y, family, starts, sub.substream(1), i2)
    return f1, f2


def _assemble(method: Method, s, margins: tuple, compute_r: bool) -> FitResult:
    f1, f2 = margins
    tf = _theta_step(method, s, f1.params, f2.params)
    params = ModelParams(f1.params, f2.params, tf.theta)
    r = reliability_exact(params) if compute_r else float("nan")
    diag = {"margin_x": f1.diagnostics(), "margin_y": f2.diagnostics(), "theta": tf.diagnostics()}
    return FitResult(method, params, r, diag)


def fit(
    s: PairedSample,
    method: Method | str = Method.MLE,
    rng: Optional[RngStream] = None,
    starts: int = DEFAULT_STARTS,
    init: Optional[ModelParams] = None,
    compute_r: bool = True,
) -> FitResult:
    """Fit the seven model parameters with ``method`` and evaluate ``R``.

    ``init`` supplies warm starts for both margin optimizations (tried in
    addition to ``starts`` random ones). Raises ``InsufficientDataError``
    for ``n < 3`` and ``EstimationError`` / ``NumericalError`` when a stage
    fails.
    """
    method = Method(method)
    if s.n < 3:
        raise InsufficientDataError(f"need n >= 3 pairs, got {s.n}")
    rng = RngStream(0) if rng is None else rng
    return _assemble(method, s, _fit_margins(s, method.family, rng, starts, init), compute_r)


def fit_mle(s: PairedSample, rng: Optional[RngStream] = None, **kw) -> FitResult:
    """Two-step maximum likelihood (inference functions for margins)."""
    return fit(s, Method.MLE, rng, **kw)


def fit_many(
    s: PairedSample,
    methods: Iterable[Method | str],
    rng: Optional[RngStream] = None,
    starts: int = DEFAULT_STARTS,
    init: Optional[ModelParams] = None,
) -> dict:
    """Fit several methods, sharing margin fits between methods of one family.

    Returns ``{method: FitResult or exception}``; results are identical to
    separate :func:`fit` calls with the same ``rng``.
    """
    methods = [Method(m) for m in methods]
    if s.n < 3:
        raise InsufficientDataError(f"need n >= 3 pairs, got {s.n}")
    rng = RngStream(0) if rng is None else rng
    cache: dict[str, object] = {}
    out: dict = {}
    for m in methods:
        fam = m.family
        if fam not in cache:
            try:
                cache[fam] = _fit_margins(s, fam, rng, starts, init)
            except (NumericalError, ValueError) as exc:
                cache[fam] = exc
        margins = cache[fam]
        if isinstance(margins, Exception):
            out[m] = margins
            continue
        try:
            out[m] = _assemble(m, s, margins, True)
        except (NumericalError, ValueError) as exc:
            out[m] = exc
    return out
