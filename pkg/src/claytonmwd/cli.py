"""Command-line interface.

Subcommands: ``ingest``, ``fit``, ``reliability``, ``simulate`` and ``gof``.
JSON documents go to stdout or ``--out``; exit status is 0 on success, 2 for
usage or precondition errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from . import __version__
from .bootstrap import BootstrapError, bootstrap_ci
from .copula import PairedSample, kendall_tau_hat
from .data import DAM_SNAPSHOT, DataError, ingest_dams, load_pairs
from .estimation.inference import aci, godambe
from .estimation.pipeline import Method, fit
from .gof import Model, gof_pvalues, information_criteria, pearson_test
from .margins import MwdParams
from .numerics import RNG_ALGORITHM, NumericalError, RngStream
from .reliability import ModelParams, reliability_exact, reliability_mc_terms
from .simulation import (
    Preset,
    preset,
    run_scenario,
    scenario_from_json,
    scenario_to_json,
    write_summary_csv,
    write_tidy_csv,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("claytonmwd")


class UsageError(ValueError):
    pass


def _meta(args, extra: Optional[dict] = None) -> dict:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "rng": {"algorithm": RNG_ALGORITHM, "seed": args.seed},
        "config": config,
        **(extra or {}),
    }


def _emit(doc: dict, out: Optional[Path]) -> None:
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _load_sample(args) -> PairedSample:
    """Daily dam series when a ``date`` column is present, plain pairs otherwise."""
    path = Path(args.data) if args.data else DAM_SNAPSHOT
    try:
        header = next(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))), [])
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if "date" in {h.strip().lower() for h in header}:
        return ingest_dams(path, args.months, args.scale, args.x_col, args.y_col)
    return load_pairs(path, args.x_col if args.x_col in header else None, args.y_col if args.y_col in header else None)


# --- commands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    s = _load_sample(args)
    doc = _meta(args, {"n": s.n, "x": s.x.tolist(), "y": s.y.tolist()})
    if args.csv:
        target = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
        try:
            w = csv.writer(target)
            w.writerow(("x", "y"))
            w.writerows(zip(s.x.tolist(), s.y.tolist()))
        finally:
            if args.out:
                target.close()
        return EXIT_OK
    _emit(doc, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    s = _load_sample(args)
    rng = RngStream(args.seed)
    res = fit(s, args.method, rng.substream(0))
    doc = _meta(args, {"n": s.n, **res.to_dict(), "intervals": {}})
    if args.aci:
        if res.method is not Method.MLE:
            raise UsageError("--aci is available for --method mle only")
        g = godambe(s, res)
        doc["intervals"]["aci"] = [iv.to_dict() for iv in aci(res, g, args.level)]
        doc["godambe_covariance"] = g.v.tolist()
    if args.B:
        rep = bootstrap_ci(s, res.method, args.B, args.level, rng.substream(1), threads=args.threads, base=res)
        doc["intervals"]["bootstrap"] = [iv.to_dict() for iv in rep.intervals]
        doc["bootstrap"] = {"B": rep.B, "failures": rep.failures}
    _emit(doc, args.out)
    return EXIT_OK


def _params_from_args(args) -> ModelParams:
    if args.params:
        doc = json.loads(Path(args.params).read_text(encoding="utf-8"))
        est = doc.get("estimates", doc)
        try:
            return ModelParams.from_dict(est)
        except KeyError as exc:
            raise UsageError(f"parameter file lacks {exc}") from exc
    if args.omega1 is None or args.omega2 is None or args.theta is None:
        raise UsageError("give --params FILE or all of --omega1, --omega2, --theta")
    return ModelParams(MwdParams(*args.omega1), MwdParams(*args.omega2), args.theta)


def cmd_reliability(args) -> int:
    m = _params_from_args(args)
    out: dict = {"parameters": m.as_dict()}
    if not args.mc_only:
        out["R_exact"] = reliability_exact(m)
    if args.mc or args.mc_only:
        terms = reliability_mc_terms(m, args.N, RngStream(args.seed))
        out["R_mc"] = float(terms.mean())
        out["R_mc_se"] = float(terms.std(ddof=1) / np.sqrt(args.N)) if args.N > 1 else None
        out["N"] = args.N
    _emit(_meta(args, out), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = scenario_to_json(scenario_from_json(args.scenario) if args.scenario else preset(args.preset))
    doc["seed"], doc["level"] = args.seed, args.level
    for key, value in (("replications", args.reps), ("theta_grid", args.theta), ("n_grid", args.n),
                       ("methods", args.methods), ("bootstrap_B", args.B)):
        if value is not None:
            doc[key] = value
    if args.aci:
        doc["aci"] = True
    sc = scenario_from_json(doc)
    cells = run_scenario(sc, threads=args.threads)
    if args.out:
        write_summary_csv(cells, args.out)
    else:
        write_summary_csv(cells, sys.stdout)
    if args.tidy_out:
        write_tidy_csv(cells, args.tidy_out, args.tidy_parameter)
    if args.meta_out:
        _emit(_meta(args, {"scenario": scenario_to_json(sc)}), args.meta_out)
    return EXIT_OK


def cmd_gof(args) -> int:
    s = _load_sample(args)
    rng = RngStream(args.seed)
    models = [Model.MWD, Model.WEIBULL] if args.model == "both" else [Model(args.model.upper())]
    margins = {}
    for j, (name, data) in enumerate((("x", s.x), ("y", s.y))):
        entries = []
        for k, model in enumerate(models):
            reports = gof_pvalues(data, model, B=args.B, rng=rng.substream(j).substream(k))
            fitted = reports[0].fitted
            entries.append({
                "model": model.value,
                "fitted": {"a": fitted.a, "b": fitted.b, "lam": fitted.lam},
                **information_criteria(data, fitted, model),
                "tests": [{"statistic": r.statistic_name.value, "value": r.statistic, "p_value": r.p_value} for r in reports],
                "refit_failures": reports[0].failures,
            })
        margins[name] = entries
    r, t, p = pearson_test(s)
    doc = _meta(args, {
        "n": s.n,
        "margins": margins,
        "pearson": {"r": r, "t": t, "p_value": p},
        "kendall_tau": kendall_tau_hat(s),
    })
    _emit(doc, args.out)
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def _probability(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return v


def _data_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="daily dam CSV (date column) or paired CSV; default: bundled snapshot")
    p.add_argument("--x-col", default="terkos", help="strength column (default: terkos)")
    p.add_argument("--y-col", default="omerli", help="stress column (default: omerli)")
    p.add_argument("--months", type=int, nargs="+", default=[9, 10, 11, 12], help="calendar months kept")
    p.add_argument("--scale", type=float, default=0.01, help="multiplier applied to occupancies")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="claytonmwd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="aggregate daily occupancies into monthly pairs")
    _data_options(p)
    p.add_argument("--csv", action="store_true", help="write x,y CSV instead of JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", parents=[common], help="estimate the seven parameters and R")
    _data_options(p)
    p.add_argument("--method", choices=[m.value for m in Method], default="mle")
    p.add_argument("--level", type=_probability, default=0.95)
    p.add_argument("--aci", action="store_true", help="asymptotic intervals (mle only)")
    p.add_argument("--B", type=int, default=0, help="bootstrap replicates (0 = none)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reliability", parents=[common], help="evaluate R at given parameters")
    p.add_argument("--params", type=Path, help="JSON with a1..theta (e.g. the output of fit)")
    p.add_argument("--omega1", type=float, nargs=3, metavar=("A", "B", "LAM"))
    p.add_argument("--omega2", type=float, nargs=3, metavar=("A", "B", "LAM"))
    p.add_argument("--theta", type=float)
    p.add_argument("--mc", action="store_true", help="also report the Monte Carlo estimate")
    p.add_argument("--mc-only", action="store_true", help="skip the quadrature value")
    p.add_argument("--N", type=int, default=100_000, help="Monte Carlo draws")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study; summary CSV")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=[x.value for x in Preset], default="setting1")
    src.add_argument("--scenario", type=Path, help="scenario JSON file")
    p.add_argument("--reps", type=int)
    p.add_argument("--theta", type=float, nargs="+")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--methods", nargs="+", choices=[m.value for m in Method])
    p.add_argument("--B", type=int, help="bootstrap replicates per fit (0 = none)")
    p.add_argument("--aci", action="store_true")
    p.add_argument("--level", type=_probability, default=0.95)
    p.add_argument("--tidy-out", type=Path, help="long-format CSV for plotting")
    p.add_argument("--tidy-parameter", default="theta")
    p.add_argument("--meta-out", type=Path, help="JSON with the resolved scenario")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gof", parents=[common], help="marginal goodness of fit and correlation")
    _data_options(p)
    p.add_argument("--model", choices=["mwd", "weibull", "both"], default="both")
    p.add_argument("--B", type=int, default=1000, help="bootstrap replicates for p-values")
    p.set_defaults(func=cmd_gof)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BootstrapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        print(f"invalid scenario at {loc}: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
