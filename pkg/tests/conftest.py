import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jitted kernels compile on first call, so per-example deadlines are meaningless
settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
