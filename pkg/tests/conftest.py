import numpy as np
import pytest

from musclearm.plant import Plant, PlantConfig


@pytest.fixture
def plant():
    return Plant(PlantConfig(seed=7))


@pytest.fixture
def noiseless_plant():
    return Plant(PlantConfig(seed=7, obs_noise_std=(0.0, 0.0, 0.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
