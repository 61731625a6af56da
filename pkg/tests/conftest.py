import numpy as np
import pytest

from obschart.zoo import GaussianLocationModel, GmmModel, RrrModel, TanhUnitModel


@pytest.fixture(scope="session")
def gmm():
    return GmmModel(sigma=1.0)


@pytest.fixture(scope="session")
def tanh():
    return TanhUnitModel()


@pytest.fixture(scope="session")
def rrr():
    return RrrModel(p=2, q=2, r=1)


@pytest.fixture(scope="session")
def gauss():
    return GaussianLocationModel()


def random_gmm_theta(rng, delta_scale=1.0):
    return np.array([rng.uniform(-1, 1), rng.uniform(-delta_scale, delta_scale), rng.uniform(-0.4, 0.4)])


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
