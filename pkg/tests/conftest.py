import numpy as np
import pytest

from postsde import kernels

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, detail: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def pure_backend():
    old = kernels.use_backend("pure")
    yield
    kernels.use_backend(old)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
