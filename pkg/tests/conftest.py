import numpy as np
import pytest

import dunesim as ds


@pytest.fixture(scope="session")
def grid16():
    return ds.make_grid(16)


@pytest.fixture(scope="session")
def grid32():
    return ds.make_grid(32)


@pytest.fixture(scope="session")
def grid64():
    return ds.make_grid(64)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fast_config():
    """Small phase lattice for cheap solver tests."""
    return ds.SolverConfig(dt_per_period=16)
