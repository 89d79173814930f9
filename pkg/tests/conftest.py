import numpy as np
import pytest

from spherefit.geometry import as_point_set


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_unit_points(n, seed):
    g = np.random.default_rng(seed).standard_normal((n, 3))
    return as_point_set(g)


@pytest.fixture
def random_points():
    return random_unit_points
