import os

# runtime invariant checks on for the whole suite; must precede any vecbal import
os.environ.setdefault("VECBAL_CHECK", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
