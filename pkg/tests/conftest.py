"""Shared fixtures plus the acceptance summary printer.

The acceptance tests register one line per criterion; the summary hook
prints them after the run regardless of output capture, so `pytest`
always shows a pass/fail line per criterion.
"""

import numpy as np
import pytest

from relflow.fields import Grid

_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def record_criterion(number: int, description: str, passed: bool):
    _ACCEPTANCE_RESULTS[number] = (description, "PASS" if passed else "FAIL")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_RESULTS):
        description, outcome = _ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} [{outcome}] {description}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid2d():
    return Grid(2, 32)


@pytest.fixture
def grid3d():
    return Grid(3, 16)
