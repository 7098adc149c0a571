import numpy as np
import pytest


def crandn(rng, *shape):
    """Standard complex Gaussian draws (unit total variance per entry)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_circle_point(rng, size):
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
