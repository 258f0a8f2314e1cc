import numpy as np
import pytest

from cfmlab.rng import stream


@pytest.fixture
def rng():
    return stream(12345, 0)


@pytest.fixture
def rng_factory():
    return stream
