import numpy as np
import pytest

from erc_evo.data_io import load_covariance
from erc_evo.synthetic import fixture_path

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def C2():
    return np.array([[0.04, 0.01], [0.01, 0.09]])


@pytest.fixture(scope="session")
def cov30():
    C, tickers = load_covariance(fixture_path(30))
    return C, tickers


@pytest.fixture(scope="session")
def cov96():
    C, tickers = load_covariance(fixture_path(96))
    return C, tickers


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
