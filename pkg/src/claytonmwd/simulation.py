"""Monte Carlo study harness: bias, MSE, interval length and coverage.

Every replication of every (theta, n) cell draws from its own stream
``RngStream(seed).substream(cell).substream(rep)``, so summaries do not
depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import jsonschema
import numpy as np

from .bootstrap import BootstrapError, bootstrap_ci
from .copula import PairedSample, sample_pairs
from .estimation.inference import aci, godambe
from .estimation.pipeline import FitResult, Method, fit_many
from .margins import MwdParams
from .numerics import NumericalError, RngStream
from .reliability import PARAMETER_NAMES, ModelParams, reliability_exact

__all__ = [
    "Preset",
    "Scenario",
    "ParameterSummary",
    "CellSummary",
    "preset",
    "run_scenario",
    "scenario_from_json",
    "scenario_to_json",
    "SCENARIO_SCHEMA",
    "CSV_COLUMNS",
    "write_summary_csv",
    "write_tidy_csv",
]

log = logging.getLogger(__name__)

ESTIMATE_NAMES = (*PARAMETER_NAMES, "R")
CSV_COLUMNS = ("theta", "n", "method", "parameter", "mean", "bias", "mse", "ci_length", "cp", "mc_se")
MAX_CELL_FAILURE_RATE = 0.05
ACI_LABEL = "mle_aci"


class Preset(str, enum.Enum):
    SETTING1 = "setting1"
    SETTING2 = "setting2"


@dataclass(frozen=True)
class Scenario:
    omega1: MwdParams
    omega2: MwdParams
    theta_grid: tuple
    n_grid: tuple
    replications: int
    bootstrap_B: int = 0
    methods: tuple = tuple(Method)
    seed: int = 0
    aci: bool = False
    level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.theta_grid or not self.n_grid or not self.methods:
            raise ValueError("theta_grid, n_grid and methods must be non-empty")
        if any(t <= 0 for t in self.theta_grid):
            raise ValueError("theta values must be positive")
        if any(n < 3 for n in self.n_grid):
            raise ValueError("sample sizes must be >= 3")
        if self.bootstrap_B and self.bootstrap_B < 100:
            raise ValueError("bootstrap_B must be 0 (off) or >= 100")
        if self.aci and Method.MLE not in self.methods:
            raise ValueError("asymptotic intervals need the mle method")


def preset(name: Preset | str, **overrides) -> Scenario:
    """The two standard configurations; any field can be overridden."""
    name = Preset(str(name).lower()) if not isinstance(name, Preset) else name
    if name is Preset.SETTING1:
        sc = Scenario(MwdParams(0.75, 1.25, 0.6), MwdParams(2, 1.5, 0.25), (2, 3, 4, 6), (25, 50, 100), 1000)
    else:
        sc = Scenario(MwdParams(0.6, 0.75, 1.4), MwdParams(2.5, 1.5, 0.5), (0.5, 1, 2, 4, 8, 10), (25, 50, 100, 200), 5000)
    return replace(sc, **overrides) if overrides else sc


# --- scenario files -------------------------------------------------------

_MWD_SCHEMA = {
    "type": "object",
    "properties": {
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "minimum": 0},
        "lam": {"type": "number", "minimum": 0},
    },
    "required": ["a", "b", "lam"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Scenario",
    "type": "object",
    "properties": {
        "omega1": _MWD_SCHEMA,
        "omega2": _MWD_SCHEMA,
        "theta_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
        "replications": {"type": "integer", "minimum": 1},
        "bootstrap_B": {"type": "integer", "minimum": 0},
        "methods": {"type": "array", "items": {"enum": [m.value for m in Method]}, "minItems": 1, "uniqueItems": True},
        "seed": {"type": "integer", "minimum": 0},
        "aci": {"type": "boolean"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "required": ["omega1", "omega2", "theta_grid", "n_grid", "replications"],
    "additionalProperties": False,
}


def scenario_from_json(doc: dict | str | Path) -> Scenario:
    """Validate a scenario document against :data:`SCENARIO_SCHEMA`.

    Raises ``jsonschema.ValidationError`` naming the offending field.
    """
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text(encoding="utf-8"))
    jsonschema.validate(doc, SCENARIO_SCHEMA)
    d = dict(doc)
    d["omega1"] = MwdParams(**d["omega1"])
    d["omega2"] = MwdParams(**d["omega2"])
    return Scenario(**d)


def scenario_to_json(sc: Scenario) -> dict:
    return {
        "omega1": {"a": sc.omega1.a, "b": sc.omega1.b, "lam": sc.omega1.lam},
        "omega2": {"a": sc.omega2.a, "b": sc.omega2.b, "lam": sc.omega2.lam},
        "theta_grid": list(sc.theta_grid),
        "n_grid": list(sc.n_grid),
        "replications": sc.replications,
        "bootstrap_B": sc.bootstrap_B,
        "methods": [m.value for m in sc.methods],
        "seed": sc.seed,
        "aci": sc.aci,
        "level": sc.level,
    }


# --- summaries ------------------------------------------------------------


@dataclass(frozen=True)
class ParameterSummary:
    parameter: str
    truth: float
    mean: float
    bias: float
    mse: float
    mc_se: float  # standard error of the mean estimate (= of the bias)
    mse_se: float
    ci_length: float = float("nan")
    cp: float = float("nan")


@dataclass(frozen=True)
class CellSummary:
    theta: float
    n: int
    method: str
    true_R: float
    replications: int
    failures: int
    valid: bool
    parameters: tuple = field(default=())

    def __getitem__(self, name: str) -> ParameterSummary:
        for p in self.parameters:
            if p.parameter == name:
                return p
        raise KeyError(name)


def _summarize(est: np.ndarray, truth: np.ndarray, lower=None, upper=None) -> tuple:
    out = []
    m = est.shape[0]
    for j, name in enumerate(ESTIMATE_NAMES):
        e = est[:, j]
        err = e - truth[j]
        sq = err**2
        sd = e.std(ddof=1) if m > 1 else 0.0
        sq_sd = sq.std(ddof=1) if m > 1 else 0.0
        ln = cp = float("nan")
        if lower is not None:
            ln = float(np.mean(upper[:, j] - lower[:, j]))
            cp = float(np.mean((lower[:, j] <= truth[j]) & (truth[j] <= upper[:, j])))
        out.append(ParameterSummary(name, float(truth[j]), float(e.mean()), float(err.mean()), float(sq.mean()),
                                    float(sd / np.sqrt(m)), float(sq_sd / np.sqrt(m)), ln, cp))
    return tuple(out)


# --- replication ----------------------------------------------------------

Estimator = Callable[[PairedSample, Sequence[Method], RngStream], dict]


def _default_estimator(s: PairedSample, methods, rng: RngStream) -> dict:
    return fit_many(s, methods, rng)


class _Replication:
    def __init__(self, sc: Scenario, theta: float, n: int, cell_stream: RngStream, estimator: Estimator):
        self.sc, self.theta, self.n, self.root, self.estimator = sc, theta, n, cell_stream, estimator

    def __call__(self, rep: int) -> dict:
        """``{label: (estimates, lower, upper) or error string}`` for one replication."""
        sc = self.sc
        st = self.root.substream(rep)
        s = sample_pairs(sc.omega1, sc.omega2, self.theta, self.n, st.substream(0))
        try:
            fits = self.estimator(s, sc.methods, st.substream(1))
        except (NumericalError, ValueError) as exc:
            return {m.value: str(exc) for m in sc.methods}
        out: dict = {}
        for k, m in enumerate(sc.methods):
            f = fits.get(m)
            if not isinstance(f, FitResult):
                out[m.value] = str(f)
                continue
            lo = hi = None
            if sc.bootstrap_B:
                try:
                    rep_ = bootstrap_ci(s, m, sc.bootstrap_B, sc.level, st.substream(2).substream(k), base=f)
                except (BootstrapError, NumericalError, ValueError) as exc:
                    out[m.value] = f"bootstrap: {exc}"
                    continue
                lo = np.array([iv.lower for iv in rep_.intervals])
                hi = np.array([iv.upper for iv in rep_.intervals])
            out[m.value] = (f.estimates(), lo, hi)
            if sc.aci and m is Method.MLE:
                try:
                    ivs = aci(f, godambe(s, f), sc.level)
                    out[ACI_LABEL] = (f.estimates(), np.array([i.lower for i in ivs]), np.array([i.upper for i in ivs]))
                except (NumericalError, ValueError) as exc:
                    out[ACI_LABEL] = f"aci: {exc}"
        return out


def _labels(sc: Scenario) -> list:
    labels = [m.value for m in sc.methods]
    if sc.aci:
        labels.append(ACI_LABEL)
    return labels


def run_scenario(
    sc: Scenario,
    estimator: Optional[Estimator] = None,
    threads: int = 1,
    cells: Optional[Sequence[tuple]] = None,
) -> list:
    """Run every (theta, n) cell and summarize each method.

    Parameters
    ----------
    estimator : callable, optional
        ``(sample, methods, rng) -> {Method: FitResult or exception}``;
        defaults to :func:`fit_many`.
    threads : int
        Worker processes for replications.
    cells : sequence of (theta, n), optional
        Restrict to these cells of the grid.

    Failed fits are excluded and counted per method; a cell whose failure
    rate exceeds 5% is marked ``valid=False``.
    """
    est = estimator or _default_estimator
    root = RngStream(sc.seed)
    out = []
    grid = [(i, t, j, n) for i, t in enumerate(sc.theta_grid) for j, n in enumerate(sc.n_grid)]
    if cells is not None:
        wanted = {(float(t), int(n)) for t, n in cells}
        grid = [g for g in grid if (g[1], g[3]) in wanted]
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for i, theta, j, n in grid:
            truth_m = ModelParams(sc.omega1, sc.omega2, theta)
            true_r = reliability_exact(truth_m)
            truth = np.append(truth_m.as_array(), true_r)
            task = _Replication(sc, theta, n, root.substream(i * len(sc.n_grid) + j), est)
            reps = range(sc.replications)
            results = list(pool.map(task, reps, chunksize=max(1, sc.replications // (4 * threads)))) if pool else [task(r) for r in reps]
            for label in _labels(sc):
                ok = [r[label] for r in results if label in r and not isinstance(r[label], str)]
                errs = [r[label] for r in results if isinstance(r.get(label), str)]
                failures = sc.replications - len(ok)
                if errs:
                    log.info("cell theta=%g n=%d %s: %d failures (first: %s)", theta, n, label, failures, errs[0])
                valid = failures <= MAX_CELL_FAILURE_RATE * sc.replications and len(ok) > 0
                params: tuple = ()
                if ok:
                    e = np.array([o[0] for o in ok])
                    if ok[0][1] is not None:
                        params = _summarize(e, truth, np.array([o[1] for o in ok]), np.array([o[2] for o in ok]))
                    else:
                        params = _summarize(e, truth)
                out.append(CellSummary(theta, n, label, float(true_r), len(ok), failures, valid, params))
    finally:
        if pool:
            pool.shutdown()
    return out


# --- output ---------------------------------------------------------------


def _fmt(v) -> str:
    return "" if isinstance(v, float) and np.isnan(v) else repr(float(v)) if isinstance(v, float) else str(v)


def write_summary_csv(cells: Sequence[CellSummary], path_or_file) -> None:
    """One row per (cell, method, parameter) in :data:`CSV_COLUMNS` order.

    Invalid cells (too many failures) are written with empty statistics.
    """
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for c in cells:
            if not c.valid or not c.parameters:
                for name in ESTIMATE_NAMES:
                    w.writerow([_fmt(c.theta), c.n, c.method, name, "", "", "", "", "", ""])
                continue
            for p in c.parameters:
                w.writerow([_fmt(c.theta), c.n, c.method, p.parameter, _fmt(p.mean), _fmt(p.bias), _fmt(p.mse),
                            _fmt(p.ci_length), _fmt(p.cp), _fmt(p.mc_se)])
    finally:
        if own:
            fh.close()


def write_tidy_csv(cells: Sequence[CellSummary], path_or_file, parameter: str = "theta") -> None:
    """Long-format ``theta, n, method, metric, value`` rows for plotting."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(("theta", "n", "method", "metric", "value"))
        for c in cells:
            if not c.valid:
                continue
            p = c[parameter]
            for metric in ("bias", "mse", "ci_length", "cp"):
                val = getattr(p, metric)
                if not np.isnan(val):
                    w.writerow([_fmt(c.theta), c.n, c.method, f"{metric}_{parameter}", _fmt(val)])
    finally:
        if own:
            fh.close()
