import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_spd(rng, n, ridge=1.0):
    a = rng.standard_normal((n, n))
    return a @ a.T + ridge * np.eye(n)
