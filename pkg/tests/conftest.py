import numpy as np
import pytest

from skdv.grid import Grid
from skdv.noise import build_kernel


@pytest.fixture(scope="session")
def grid():
    return Grid(80.0, 1024)


@pytest.fixture(scope="session")
def coarse():
    return Grid(80.0, 512)


@pytest.fixture(scope="session")
def kernel(grid):
    return build_kernel("gaussian", 1.0, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""
    def _report(number, title, ok, detail, seconds):
        ACCEPTANCE_LINES.append((number, f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: "
                                         f"{detail} ({seconds:.1f} s)"))
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
