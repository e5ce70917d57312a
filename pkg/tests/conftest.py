"""Shared pytest configuration.

Tests marked ``acceptance(number, title)`` are collected into a one-line
per-criterion summary printed at the end of the session.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): top-level acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "seen": False})
    # tests may report the wall-clock time of the analysis they judge
    # (including shared module-level runs); otherwise use pytest's timing
    measured = dict(report.user_properties).get("elapsed")
    if report.when == "call" and measured is not None:
        entry["seconds"] = entry.get("seconds", 0.0) + measured
    elif measured is None and report.when == "call":
        entry["seconds"] = entry.get("seconds", 0.0) + report.duration
    if report.when == "call" or report.failed:
        entry["seen"] = True
        entry["passed"] = entry["passed"] and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        status = "PASS" if e["passed"] and e["seen"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {e['title']} ({e.get('seconds', 0.0):.2f} s)")
