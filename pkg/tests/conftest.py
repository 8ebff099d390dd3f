import numpy as np
import pytest

from neural_gpu import backend


@pytest.fixture(params=backend.available())
def each_backend(request):
    """Run the test once per available convolution backend."""
    previous = backend.use(request.param)
    yield request.param
    backend.use(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
