import numpy as np
import pytest

from tritank import PlantParams, OperatingPoint, augment, discretize, jacobian_at


@pytest.fixture
def params():
    return PlantParams()


@pytest.fixture
def y0():
    return np.array([0.40, 0.20, 0.30])


@pytest.fixture
def op(y0):
    return OperatingPoint(np.array([0.35e-4, 0.375e-4]), y0)


@pytest.fixture
def dm(params, y0):
    return discretize(jacobian_at(params, y0), 1.0)


@pytest.fixture
def am(dm):
    return augment(dm)


def random_admissible_levels(rng, params, n):
    """Levels with the h1 > h3 > h2 ordering and comfortable gaps."""
    h2 = rng.uniform(0.02, 0.30, n)
    h3 = h2 + rng.uniform(0.01, 0.15, n)
    h1 = h3 + rng.uniform(0.01, 0.15, n)
    out = np.column_stack([h1, h2, h3])
    return np.clip(out, 0.0, params.h_max - 1e-3)
