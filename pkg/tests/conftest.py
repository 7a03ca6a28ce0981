import numpy as np
import pytest

from qrepeat import ChainSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec3():
    return ChainSpec(2, 2, 3)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS.values():
            terminalreporter.write_line(line)
