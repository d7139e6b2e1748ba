import numpy as np
import pytest
from hypothesis import settings

from novikov_lab.field_core import Grid

settings.register_profile("lab", deadline=None, max_examples=30)
settings.load_profile("lab")


@pytest.fixture
def grid():
    return Grid.symmetric(30.0, 0.05)


@pytest.fixture
def fine_grid():
    return Grid.symmetric(30.0, 0.0125)


def gaussian_sum(x, centers, amps, widths):
    out = np.zeros_like(x)
    for c, a, w in zip(centers, amps, widths):
        out += a * np.exp(-(((x - c) / w) ** 2))
    return out
