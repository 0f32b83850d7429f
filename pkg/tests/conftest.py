import numpy as np
import pytest

from bnls.energy import ModelParams
from bnls.radial import build_grid
from bnls.scalar import solve_scalar_ground_state
from bnls.spectral import thresholds
from bnls.system import semitrivial_states


@pytest.fixture(scope="session")
def grid():
    return build_grid(2, 27.0, 1024)


@pytest.fixture(scope="session")
def ground(grid):
    return solve_scalar_ground_state(1.0, 1.0, grid)


@pytest.fixture(scope="session")
def U(ground):
    return ground.state


@pytest.fixture(scope="session")
def sym_params():
    return ModelParams()


@pytest.fixture(scope="session")
def sym_constants(grid, sym_params):
    u1, u2 = semitrivial_states(sym_params, grid)
    return thresholds(sym_params, u1.u1, u2.u2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def bump(grid, centre=0.0, width=2.0):
    """Smooth clamped test field."""
    r = grid.r
    v = np.exp(-(((r - centre) / width) ** 2)) * (1 - (r / grid.R) ** 2) ** 2
    return grid.field(v)
