import numpy as np
import pytest

from fastmm.algo_spec import get_algorithm

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def strassen():
    return get_algorithm("strassen")


@pytest.fixture(scope="session")
def alg323():
    return get_algorithm("323")


@pytest.fixture(scope="session")
def alg442():
    return get_algorithm("442")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
