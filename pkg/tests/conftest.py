import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None or not (report.when == "call" or report.failed):
        return
    ACCEPTANCE[crit] = ACCEPTANCE.get(crit, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ACCEPTANCE[crit] else 'FAIL'}  criterion {crit}")
