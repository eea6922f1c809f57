import numpy as np
import pytest

from mublab.numcore import SeededRng


@pytest.fixture
def rng():
    return SeededRng(20240601)


def random_state(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
