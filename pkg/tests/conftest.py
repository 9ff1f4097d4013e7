"""Shared fixtures and the acceptance summary report."""
import numpy as np
import pytest

# criterion id -> (description, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS = {}


def record_acceptance(criterion: str, description: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[criterion] = (description, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        description, passed, detail = ACCEPTANCE_RESULTS[key]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {key}: {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
