import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slesim.lattice import default_grid
from slesim.spectrum import Potential, eigenbasis

settings.register_profile(
    "slesim", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("slesim")


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def harmonic_basis(grid):
    return eigenbasis(grid, Potential.harmonic(), 40)


@pytest.fixture(scope="session")
def linear_basis(grid):
    return eigenbasis(grid, Potential.linear(), 40)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_REPORT = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    return request.config.stash.setdefault(_REPORT, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
