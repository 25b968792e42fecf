import numpy as np
import pytest

from finsler_lab.scenarios import load_example


@pytest.fixture(scope="session")
def disc_scenario():
    return load_example("disc-radial")


@pytest.fixture(scope="session")
def minkowski_scenario():
    return load_example("minkowski-randers-distance")


@pytest.fixture(scope="session")
def sphere_scenario():
    return load_example("randers-sphere-height")


@pytest.fixture(scope="session")
def linear_scenario():
    return load_example("euclidean-linear")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
