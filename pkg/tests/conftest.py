import numpy as np
import pytest

from claytonmwd.margins import MwdParams
from claytonmwd.reliability import ModelParams

OMEGA1_S1 = MwdParams(0.75, 1.25, 0.6)
OMEGA2_S1 = MwdParams(2.0, 1.5, 0.25)
OMEGA1_S2 = MwdParams(0.6, 0.75, 1.4)
OMEGA2_S2 = MwdParams(2.5, 1.5, 0.5)


def setting1(theta: float) -> ModelParams:
    return ModelParams(OMEGA1_S1, OMEGA2_S1, theta)


def setting2(theta: float) -> ModelParams:
    return ModelParams(OMEGA1_S2, OMEGA2_S2, theta)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240601)


# --- acceptance reporting -------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, summary): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    num, summary = mark.args
    detail = ""
    if rep.failed and call.excinfo is not None:
        detail = str(call.excinfo.value).strip().splitlines()[0][:160] if str(call.excinfo.value).strip() else call.excinfo.typename
    if rep.when == "call" or rep.failed:
        _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", summary, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, summary, detail = _CRITERIA[num]
        line = f"criterion {num:>2}: {status}  {summary}"
        tr.write_line(line + (f"  [{detail}]" if detail else ""))
