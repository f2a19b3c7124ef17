import numpy as np
import pytest

import varlap as vl


@pytest.fixture
def grid_1d():
    return vl.build_grid(1, -4.0, 4.0, 63)


@pytest.fixture
def grid_2d():
    return vl.build_grid(2, -4.0, 4.0, 31)


def gaussian_on(grid):
    pts = grid.points()
    return vl.GridFunction(grid, np.exp(-np.sum(pts**2, axis=-1)))


def tanh_dec_field(lo=0.05, hi=1.0):
    return vl.OrderField.from_callable(
        lambda p: 1.0 - 0.9 * np.tanh(np.sqrt(np.sum(p**2, axis=-1))), lo, hi)


def tanh_inc_field():
    return vl.OrderField.from_callable(
        lambda p: 1.0 + 0.9 * np.tanh(np.sqrt(np.sum(p**2, axis=-1))), 1.0, 1.95)
