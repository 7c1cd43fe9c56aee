import math

import pytest

from hagerlab.symbol import FourierSymbol, exp_minus_ix
from hagerlab.theory import ModelParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def g():
    return exp_minus_ix()


@pytest.fixture(scope="session")
def skewed():
    """Asymmetric symbol with a nonzero mean: e^{-ix} + 0.2 e^{-2ix} + 0.1 + 0.05i."""
    return FourierSymbol({-1: 1.0, -2: 0.2, 0: 0.1 + 0.05j})


@pytest.fixture(scope="session")
def params(g):
    return ModelParams.from_delta(0.05, math.exp(-20.0), g)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
