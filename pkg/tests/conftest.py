import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spacor import kernels
from spacor.config import table1_config

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def _available_backends():
    names = ["python"]
    try:
        kernels.backend("cython")
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


BACKENDS = _available_backends()


@pytest.fixture
def cfg():
    return table1_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.backend(request.param)
