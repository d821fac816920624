import numpy as np
import pytest

import bdsim

# The acceptance tests append one line per criterion here; the summary hook
# prints them after the run so they are visible without -s.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# frozen oracle: root of sqrt(2(beta-lam))*tan(a*sqrt(2(beta-lam))) = sqrt(2 lam)
# for the unit square well, computed by bisection before the build
LAMBDA0_WELL_1D = 0.6038978338633946


@pytest.fixture(scope="session")
def well1d():
    return bdsim.RateField.square_well(1.0, 1.0, dim=1)


@pytest.fixture(scope="session")
def spec1d(well1d):
    grid = bdsim.Grid.line(20.0, 4000)
    return bdsim.principal_eigenpair(bdsim.discretize(well1d, grid))


@pytest.fixture(scope="session")
def well3d():
    return bdsim.RateField.square_well(3.0, 1.0, dim=3)


@pytest.fixture(scope="session")
def spec3d(well3d):
    grid = bdsim.Grid.radial(3, 30.0, 3000)
    return bdsim.principal_eigenpair(bdsim.discretize(well3d, grid))
