import numpy as np
import pytest

from sqzsense.noise import SpectralDensitySpec
from sqzsense.schedule import MeasurementSchedule


@pytest.fixture
def ou():
    return SpectralDensitySpec.ornstein_uhlenbeck(1.0, 1.0)


@pytest.fixture
def weak_ou():
    return SpectralDensitySpec.ornstein_uhlenbeck(0.01, 1.0)


@pytest.fixture
def schedule():
    return MeasurementSchedule.uniform(10, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
