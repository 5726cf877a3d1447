import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "chaoslab",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("chaoslab")


@pytest.fixture
def gen():
    return np.random.default_rng(905)
