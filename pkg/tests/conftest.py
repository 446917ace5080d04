import numpy as np
import pytest

from rqclab.rng import RngStream


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


@pytest.fixture
def stream():
    return RngStream(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    from tests_support import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
