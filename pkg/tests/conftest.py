import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    details = [v for k, v in item.user_properties if k == "detail"]
    _CRITERIA.setdefault(marker.args[0], []).append((report.passed, item.name, details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        parts = _CRITERIA[n]
        ok = all(p for p, _, _ in parts)
        detail = "; ".join(d for _, name, ds in parts for d in (ds or [name]))
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
