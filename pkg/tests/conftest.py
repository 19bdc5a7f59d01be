import re
import time

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - start))


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        elapsed = dict(report.user_properties).get("elapsed", 0.0)
        _results[n] = ("PASS" if report.outcome == "passed" else "FAIL", m.group(2).replace("_", " "), elapsed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        status, name, elapsed = _results[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {name}  ({elapsed:.3f} s)")
