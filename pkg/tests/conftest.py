import numpy as np
import pytest

from posbeam.scenario import GridConfig, build_manhattan_grid


@pytest.fixture(scope="session")
def default_world():
    return build_manhattan_grid(GridConfig())


@pytest.fixture(scope="session")
def small_world():
    return build_manhattan_grid(GridConfig(3, 3, 100.0, 20.0, 28.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
