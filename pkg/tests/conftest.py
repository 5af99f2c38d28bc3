import json

import pytest

from pharmonic.geometry import make_grid, support_of_ball, support_of_ellipse
from pharmonic.measure import MeasureConfig
from pharmonic.pde import AnnulusConfig


@pytest.fixture
def grid():
    return make_grid(256)


@pytest.fixture
def small_grid():
    return make_grid(64)


@pytest.fixture
def ball(grid):
    return support_of_ball(1.0, (0.0, 0.0), grid)


@pytest.fixture
def small_annulus():
    return AnnulusConfig(Ns=16, Ntheta=64)


@pytest.fixture
def small_cfg(small_grid, small_annulus):
    return MeasureConfig(annulus=small_annulus, grid=small_grid)


@pytest.fixture
def radial_cfg():
    """Unit disk setting of the ring oracle: obstacle of radius 0.5 at the origin."""
    annulus = AnnulusConfig(rho=0.5, obstacle_center=(0.0, 0.0), Ns=64, Ntheta=128)
    return MeasureConfig(annulus=annulus, grid=make_grid(128))


@pytest.fixture
def body_file(tmp_path):
    """Writes an ellipse body JSON on a 32 direction grid and returns its path."""
    def write(a=1.5, b=1.0, name='ellipse.json'):
        K = support_of_ellipse(a, b, make_grid(32))
        path = tmp_path / name
        path.write_text(json.dumps({'grid_size': 32, 'support': K.h.tolist()}))
        return str(path)
    return write
