"""Shared pytest wiring.

The acceptance tests are named test_criterion_NN; this plugin collects their
outcomes and prints one ACCEPTANCE line per criterion at the end of the run,
so a scan of the terminal summary answers "which checks hold" without
digging through tracebacks.
"""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)")

_outcomes: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if match is None:
        return
    num = int(match.group(1))
    if report.failed:
        _outcomes[num] = False
    elif report.when == "call" and report.passed:
        _outcomes.setdefault(num, True)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance checks")
    for num in sorted(_outcomes):
        verdict = "PASS" if _outcomes[num] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num}: {verdict}")
