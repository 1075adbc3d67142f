import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_blas(monkeypatch):
    # worker processes inherit this; keeps BLAS from oversubscribing the host
    monkeypatch.setenv("OMP_NUM_THREADS", os.environ.get("OMP_NUM_THREADS", "1"))


# -- acceptance summary: one line per criterion --------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and not report.failed and not report.skipped):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": 0, "failed": 0, "skipped": []})
    if report.failed:
        entry["failed"] += 1
    elif report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        entry["skipped"].append(reason.replace("Skipped: ", ""))
    elif report.when == "call":
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        verdict = "FAIL" if e["failed"] else ("PASS" if e["passed"] else "SKIP")
        line = f"criterion {number:>2} {verdict}  {e['title']} ({e['passed']} passed, {e['failed']} failed"
        line += f", {len(e['skipped'])} skipped: {'; '.join(e['skipped'])})" if e["skipped"] else ")"
        terminalreporter.write_line(line)
