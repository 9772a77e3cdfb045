"""Parametric bootstrap percentile intervals for the model parameters and ``R``.

Each replicate regenerates ``n`` dependent pairs at the fitted parameters
(including the fitted ``theta``), refits with the same method and records
the eight estimates. Percentile intervals use linearly interpolated
empirical quantiles.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .copula import PairedSample, sample_pairs
from .estimation.inference import IntervalEstimate
from .estimation.pipeline import FitResult, Method, fit
from .numerics import NumericalError, RngStream
from .reliability import PARAMETER_NAMES

__all__ = [
    "BootstrapReport",
    "BootstrapError",
    "bootstrap_ci",
    "percentile_intervals",
    "BOOTSTRAP_STARTS",
    "MethodEstimator",
]

log = logging.getLogger(__name__)

ESTIMATE_NAMES = (*PARAMETER_NAMES, "R")
MAX_FAILURE_RATE = 0.10
# random multi-starts per replicate, on top of the warm start at the base fit
BOOTSTRAP_STARTS = 1

Estimator = Callable[[PairedSample, RngStream, Optional[FitResult]], FitResult]


@dataclass(frozen=True)
class BootstrapReport:
    method: Method
    B: int
    level: float
    base: FitResult
    intervals: list
    failures: int
    replicate_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def interval(self, name: str) -> IntervalEstimate:
        for iv in self.intervals:
            if iv.parameter == name:
                return iv
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "B": self.B,
            "level": self.level,
            "failures": self.failures,
            "intervals": [iv.to_dict() for iv in self.intervals],
        }


class BootstrapError(NumericalError):
    """Too many failed replicates; ``report`` holds what was collected."""

    def __init__(self, message: str, report: BootstrapReport):
        super().__init__(message)
        self.report = report


class MethodEstimator:
    """Refit with one of the built-in methods, warm-started at the base fit."""

    def __init__(self, method: Method | str, starts: int = BOOTSTRAP_STARTS):
        self.method, self.starts = Method(method), starts

    def __call__(self, s: PairedSample, rng: RngStream, base: Optional[FitResult]) -> FitResult:
        if base is None:
            return fit(s, self.method, rng)
        return fit(s, self.method, rng, starts=self.starts, init=base.params)


class _Replicate:
    """Picklable replicate task so workers can run in separate processes."""

    def __init__(self, base: FitResult, n: int, estimator: Estimator, root: RngStream):
        self.base, self.n, self.estimator, self.root = base, n, estimator, root

    def __call__(self, b: int):
        stream = self.root.substream(b)
        p = self.base.params
        try:
            s = sample_pairs(p.omega1, p.omega2, p.theta, self.n, stream.substream(0))
            return self.estimator(s, stream.substream(1), self.base).estimates()
        except (NumericalError, ValueError) as exc:
            return str(exc)


def percentile_intervals(reps: np.ndarray, estimates, level: float) -> list:
    """Percentile intervals from a ``(B, 8)`` replicate matrix."""
    alpha = 1 - level
    q = np.quantile(reps, [alpha / 2, 1 - alpha / 2], axis=0, method="linear")
    return [
        IntervalEstimate(name, float(est), float(lo), float(hi), level, "bootstrap")
        for name, est, lo, hi in zip(ESTIMATE_NAMES, estimates, q[0], q[1])
    ]


def bootstrap_ci(
    s: PairedSample,
    method: Method | str = Method.MLE,
    B: int = 1000,
    level: float = 0.95,
    rng: Optional[RngStream] = None,
    estimator: Optional[Estimator] = None,
    keep_replicates: bool = False,
    starts: int = BOOTSTRAP_STARTS,
    threads: int = 1,
    base: Optional[FitResult] = None,
) -> BootstrapReport:
    """Parametric bootstrap percentile intervals (default ``B = 1000``).

    Parameters
    ----------
    s : PairedSample
        Observed data.
    method : Method or str
        One of the six estimation methods.
    B : int
        Number of replicates, at least 100.
    level : float
        Two-sided confidence level.
    rng : RngStream
        Root stream; replicate ``b`` draws from ``rng.substream(1).substream(b)``.
    estimator : callable, optional
        ``(sample, rng, base_fit) -> FitResult``; replaces the built-in refit.
    starts : int
        Random multi-starts per replicate margin fit, in addition to the
        warm start at the base estimate.
    threads : int
        Worker processes; results do not depend on this value.
    base : FitResult, optional
        Precomputed fit on ``s`` (skips step 1).

    Raises
    ------
    BootstrapError
        More than 10% of replicates failed; the partial report is attached.
    """
    method = Method(method)
    if B < 100:
        raise ValueError("B must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = RngStream(0) if rng is None else rng
    est = estimator or MethodEstimator(method, starts)
    if base is None:
        base = est(s, rng.substream(0), None)
    task = _Replicate(base, s.n, est, rng.substream(1))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(B), chunksize=max(1, B // (8 * threads))))
    else:
        results = [task(b) for b in range(B)]
    ok = [r for r in results if not isinstance(r, str)]
    failures = B - len(ok)
    if failures:
        log.info("%d of %d bootstrap replicates failed (first: %s)", failures, B,
                 next(r for r in results if isinstance(r, str)))
    reps = np.array(ok, dtype=float).reshape(-1, len(ESTIMATE_NAMES))
    intervals = percentile_intervals(reps, base.estimates(), level) if len(ok) else []
    report = BootstrapReport(method, B, level, base, intervals, failures, reps if keep_replicates else None)
    if failures > MAX_FAILURE_RATE * B:
        raise BootstrapError(f"{failures} of {B} bootstrap replicates failed", report)
    return report
