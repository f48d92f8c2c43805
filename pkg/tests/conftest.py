from pathlib import Path

import pytest

from opsl.io import load_model, load_strategies

ROOT = Path(__file__).resolve().parent.parent
EXAMPLES = ROOT / "examples"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "criterion", None)
    if n is not None:
        ok = report.outcome == "passed"
        _criteria[n] = _criteria.get(n, True) and ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if _criteria[n] else 'FAIL'}")


@pytest.fixture(scope="session")
def intercept():
    return load_model(EXAMPLES / "intercept.pomas.json")


@pytest.fixture(scope="session")
def intercept_profile():
    st = load_strategies(EXAMPLES / "intercept.strategies.json")
    return {"1": st["1"], "2": st["2"]}
