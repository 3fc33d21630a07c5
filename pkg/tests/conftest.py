import numpy as np
import pytest

from meshless.pointcloud import (Domain, GridGenConfig, build_neighborhoods,
                                 generate_grid)


def make_cloud(dim, n, r_factor=0.5, seed=0, periodic=True):
    domain = Domain(-5.0, 5.0, dim, periodic=periodic)
    width = domain.hi - domain.lo
    dx = width / n if periodic else width / (n - 1)
    cloud = generate_grid(domain, GridGenConfig(
        n=n, r=r_factor * dx, seed=np.random.SeedSequence(seed)))
    return build_neighborhoods(cloud)


@pytest.fixture(scope="session")
def cloud1d():
    return make_cloud(1, 64, seed=0)


@pytest.fixture(scope="session")
def cloud2d():
    return make_cloud(2, 20, seed=1)


@pytest.fixture(scope="session")
def cloud1d_uniform():
    return make_cloud(1, 64, r_factor=0.0, seed=0)


@pytest.fixture(scope="session")
def cloud2d_uniform():
    return make_cloud(2, 16, r_factor=0.0, seed=0)
