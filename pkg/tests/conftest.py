"""Shared fixtures and the per-criterion PASS/FAIL report of the acceptance suite."""
from collections import OrderedDict

import numpy as np
import pytest

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n = int(marker.args[0])
    entry = _CRITERIA.setdefault(n, {"ok": True, "tests": [], "details": []})
    ok = call.excinfo is None
    entry["ok"] &= ok
    entry["tests"].append((item.name, ok))
    for key, value in item.user_properties:
        if key == "detail":
            entry["details"].append(str(value))


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        failed = [name for name, ok in entry["tests"] if not ok]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        if failed:
            detail = (detail + "; " if detail else "") + "failed: " + ", ".join(failed)
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
