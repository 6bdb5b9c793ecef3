import numpy as np
import pytest

from terratour import random_grid, triangulate

# grid matching the simulation setup: 200x200 units, 10x10 spot heights, 0-100
PAPER_CELL = 200.0 / 9.0


def make_tin(seed, nrows=10, ncols=10, cellsize=PAPER_CELL, hmin=0.0, hmax=100.0):
    return triangulate(random_grid(seed, nrows, ncols, cellsize, hmin, hmax))


def flat_tin(height=0.0, nrows=10, ncols=10, cellsize=PAPER_CELL):
    dem = random_grid(1, nrows, ncols, cellsize, height, height)
    return triangulate(dem)


@pytest.fixture
def rough_tin():
    return make_tin(42)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(2024))
