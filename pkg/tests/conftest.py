import numpy as np
import pytest

from memdropout import MemoryModule


def random_memory(rng, n, d, dv=3, max_age=20, with_variance=True):
    keys = rng.standard_normal((n, d))
    keys /= np.linalg.norm(keys, axis=1, keepdims=True)
    variances = rng.random((n, d)) * 0.05 if with_variance else np.zeros((n, d))
    return MemoryModule(
        keys=keys,
        values=rng.standard_normal((n, dv)),
        ages=rng.integers(0, max_age, size=n),
        variances=variances,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mem_factory():
    return random_memory
