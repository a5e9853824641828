import numpy as np
import pytest

from dppfit.geometry import Window
from dppfit.kernels import KernelModel


@pytest.fixture
def unit_square():
    return Window.cube(1.0)


@pytest.fixture
def gauss():
    """The reference model: rho = 100, alpha = 0.03 in the plane."""
    return KernelModel.gaussian(100.0, 0.03)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
