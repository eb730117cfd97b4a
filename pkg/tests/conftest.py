import numpy as np
import pytest

import fpl


@pytest.fixture(scope="session")
def grid8():
    return fpl.GridSpec(8, 5.0)


@pytest.fixture(scope="session")
def ws8(grid8):
    return fpl.make_workspace(grid8, lam=1.0)


@pytest.fixture(scope="session")
def cons8(grid8):
    return fpl.build_conservation(grid8)


@pytest.fixture(scope="session")
def grid12():
    return fpl.GridSpec(12, 4.4)


@pytest.fixture(scope="session")
def ws12(grid12):
    return fpl.make_workspace(grid12, lam=1.0)


@pytest.fixture(scope="session")
def grid16():
    return fpl.GridSpec(16, 4.5)


@pytest.fixture(scope="session")
def ws16(grid16):
    return fpl.make_workspace(grid16, lam=1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng, scale=1.0):
    return fpl.VelocityField(
        grid, scale * rng.standard_normal((grid.n_modes,) * 3)
    )


@pytest.fixture()
def smooth_gaussian16():
    grid = fpl.GridSpec(16, 4.5)
    return fpl.maxwellian_field(fpl.MaxwellianSpec(1.0, (0.0, 0.0, 0.0), 0.8), grid)
