import functools

import pytest

from rpng.engine import auto_half_width
from rpng.marks import generate_marks

GOLDEN_SEEDS = tuple(range(42, 52))
GOLDEN_LAM = 1.0
GOLDEN_LAM0 = 2.0


@functools.lru_cache(maxsize=None)
def golden_log(seed: int, horizon: float = 20.0):
    """Reference logs: lam=1, lam0=2, auto window."""
    return generate_marks(GOLDEN_LAM, GOLDEN_LAM0, auto_half_width(GOLDEN_LAM, horizon), horizon, seed)


@pytest.fixture(scope="session")
def golden_logs():
    return [golden_log(s) for s in GOLDEN_SEEDS]


ACCEPTANCE_LINES = []


def report(criterion: int, passed: bool, detail: str):
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
