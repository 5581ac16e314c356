import math

import numpy as np
import pytest

from goldstone.bcs import solve_gap


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def sol_ground():
    """epsilon = 0.4 at zero temperature: mu = 1/2, |lambda| = 0.3."""
    return solve_gap(0.4, math.inf)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report(request):
    """Record one pass/fail line per acceptance criterion."""

    def _report(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
