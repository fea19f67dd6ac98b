import math

import pytest

from conatsim import heisenberg

ACCEPTANCE_FILE = "test_acceptance.py"
_acceptance = {}


def input_combo(reg, terms):
    """Linear form ``sum c * q_k`` over the register's input labels; terms are ``(c, mode, q)``."""
    return heisenberg.combine([(c, reg.input_form(m, q)) for c, m, q in terms])


def e2(r):
    return math.exp(-2.0 * r)


@pytest.fixture
def identity_register():
    def make(n, names=None):
        return heisenberg.new_register(n, names=names)
    return make


def pytest_runtest_logreport(report):
    if ACCEPTANCE_FILE not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # parametrized cases of one criterion collapse into a single line
        name = report.nodeid.split("::")[-1].split("[")[0]
        _acceptance.setdefault(name, []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance):
        status = "PASS" if all(_acceptance[name]) else "FAIL"
        label = name.replace("test_criterion_", "criterion ").replace("_", " ", 1)
        terminalreporter.write_line(f"{status}  {label}")
