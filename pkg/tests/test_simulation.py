import csv
import io
import json

import jsonschema
import numpy as np
import pytest

from claytonmwd.estimation.pipeline import FitResult, Method
from claytonmwd.reliability import ModelParams, reliability_exact
from claytonmwd.simulation import (
    CSV_COLUMNS,
    Preset,
    Scenario,
    preset,
    run_scenario,
    scenario_from_json,
    scenario_to_json,
    write_summary_csv,
    write_tidy_csv,
)

from conftest import OMEGA1_S1, OMEGA2_S1


class Oracle:
    """Estimator that reports the generating parameters exactly."""

    def __init__(self, sc):
        self.sc = sc

    def __call__(self, s, methods, rng):
        m = ModelParams(self.sc.omega1, self.sc.omega2, self.sc.theta_grid[0])
        return {k: FitResult(k, m, reliability_exact(m)) for k in methods}


class Broken:
    def __call__(self, s, methods, rng):
        return {Method.MLE: ValueError("nope")}


@pytest.fixture
def tiny():
    return Scenario(OMEGA1_S1, OMEGA2_S1, (2.0,), (20,), 6, methods=("mle",))


def test_presets():
    s1, s2 = preset("setting1"), preset(Preset.SETTING2)
    assert s1.theta_grid == (2, 3, 4, 6) and s1.n_grid == (25, 50, 100) and s1.replications == 1000
    assert s2.theta_grid == (0.5, 1, 2, 4, 8, 10) and s2.n_grid == (25, 50, 100, 200) and s2.replications == 5000
    assert s1.bootstrap_B == 0 and s1.methods == tuple(Method)
    assert preset("setting1", replications=7).replications == 7
    assert reliability_exact(ModelParams(s1.omega1, s1.omega2, 2.0)) == pytest.approx(0.76403, abs=1e-5)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(OMEGA1_S1, OMEGA2_S1, (2.0,), (2,), 5)
    with pytest.raises(ValueError):
        Scenario(OMEGA1_S1, OMEGA2_S1, (2.0,), (20,), 5, bootstrap_B=50)
    with pytest.raises(ValueError):
        Scenario(OMEGA1_S1, OMEGA2_S1, (2.0,), (20,), 5, methods=("lse",), aci=True)


def test_json_round_trip(tmp_path):
    sc = preset("setting2", seed=9)
    doc = scenario_to_json(sc)
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(doc))
    assert scenario_from_json(p) == sc
    assert scenario_from_json(doc) == sc


@pytest.mark.parametrize("patch", [{"n_grid": [2]}, {"theta_grid": []}, {"methods": ["bayes"]},
                                   {"unknown": 1}, {"omega1": {"a": -1, "b": 1, "lam": 0}}])
def test_schema_rejects(patch):
    doc = {**scenario_to_json(preset("setting1")), **patch}
    with pytest.raises(jsonschema.ValidationError):
        scenario_from_json(doc)


def test_oracle_estimator_has_zero_error(tiny):
    cells = run_scenario(tiny, estimator=Oracle(tiny))
    (c,) = cells
    assert c.valid and c.failures == 0 and c.replications == 6
    for p in c.parameters:
        assert p.bias == 0.0 and p.mse == 0.0 and p.mc_se == 0.0
    assert c["R"].mean == pytest.approx(c.true_R)


def test_failures_invalidate_cell(tiny):
    (c,) = run_scenario(tiny, estimator=Broken())
    assert not c.valid and c.failures == 6
    buf = io.StringIO()
    write_summary_csv([c], buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert all(r[4] == "" for r in rows[1:])


def test_real_run_and_csv(tmp_path):
    sc = Scenario(OMEGA1_S1, OMEGA2_S1, (2.0, 4.0), (25,), 4, methods=("mle", "lse1"), seed=3, aci=True)
    cells = run_scenario(sc)
    assert [(c.theta, c.method) for c in cells] == [(2.0, "mle"), (2.0, "lse1"), (2.0, "mle_aci"),
                                                    (4.0, "mle"), (4.0, "lse1"), (4.0, "mle_aci")]
    path = tmp_path / "out.csv"
    write_summary_csv(cells, path)
    rows = list(csv.DictReader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 6 * 8
    aci_rows = [r for r in rows if r["method"] == "mle_aci"]
    assert all(r["cp"] != "" for r in aci_rows)
    # the point estimates behind the ACI rows are the MLE ones
    mle = {(r["theta"], r["parameter"]): r["mean"] for r in rows if r["method"] == "mle"}
    assert all(mle[(r["theta"], r["parameter"])] == r["mean"] for r in aci_rows)

    tidy = tmp_path / "tidy.csv"
    write_tidy_csv(cells, tidy)
    trows = list(csv.DictReader(tidy.open()))
    assert {r["metric"] for r in trows} >= {"bias_theta", "mse_theta", "cp_theta"}

    # running a subset reproduces the same numbers
    (sub,) = [c for c in run_scenario(sc, cells=[(4.0, 25)]) if c.method == "mle"]
    assert sub["theta"].mean == cells[3]["theta"].mean
