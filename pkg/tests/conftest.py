import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_outcomes = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or report.failed:
        if _outcomes.get(name) != "FAIL":
            _outcomes[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    import test_acceptance as acc
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, label in acc.CRITERIA.items():
        if name not in _outcomes:
            continue
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in acc.DETAILS.get(name, {}).items())
        tr.write_line(f"{_outcomes[name]}  criterion {label}: {detail}")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)
