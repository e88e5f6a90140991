import numpy as np
import pytest

from nonholo import systems


@pytest.fixture(scope="session")
def particle():
    return systems.particle_system()


@pytest.fixture(scope="session")
def disk():
    return systems.disk_system()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
