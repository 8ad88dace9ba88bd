import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pme_obstacle import PmeParameters, SpaceTimeGrid
from pme_obstacle.fixtures import default_spec, make_obstacle


@pytest.fixture
def params():
    return PmeParameters(m=0.5)


@pytest.fixture
def grid_small():
    return SpaceTimeGrid(d=1, nx=31, nt=40, T=1.0)


@pytest.fixture
def grid_default():
    return SpaceTimeGrid(d=1, nx=101, nt=200, T=1.0)


@pytest.fixture
def grid_2d():
    return SpaceTimeGrid(d=2, nx=15, ny=13, nt=16, T=1.0)


@pytest.fixture
def bump_obstacle_small(grid_small):
    return make_obstacle(default_spec(), grid_small)
