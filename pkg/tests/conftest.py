"""Shared fixtures and the acceptance-criteria summary hook."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def _record(number, description, passed, detail=""):
        ACCEPTANCE_RESULTS[number] = (description, bool(passed), detail)
        assert passed, f"criterion {number} failed: {description} {detail}"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        description, passed, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}: {status}  {description}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
