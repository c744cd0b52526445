import numpy as np
import pytest

from curvlab.generators import gaussian_bianchi, item_rng


def random_operator(n: int, seed: int, stream: int = 99):
    return gaussian_bianchi(n, item_rng(seed, 0, stream))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
