"""Meshless generalized finite difference schemes for linear advection."""

__version__ = "0.1.0"

from .pointcloud import Domain, GridGenConfig, PointCloud, generate_grid, \
    build_neighborhoods
from .schemes import build_scheme, SCHEME_IDS

__all__ = ["Domain", "GridGenConfig", "PointCloud", "generate_grid",
           "build_neighborhoods", "build_scheme", "SCHEME_IDS",
           "__version__"]
