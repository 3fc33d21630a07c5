"""Linear stability analysis of assembled spatial operators.

A semi-discretization du/dt = L u is stable for long-time integration
only if no eigenvalue of L has positive real part.  Random point
clouds push eigenvalues across the imaginary axis for some scheme and
degree combinations, so the studies here measure the fraction of
sampled grids whose operator is unstable.

The instability threshold on max Re(lambda) is 1e-13: large enough to
ignore roundoff from the eigensolver on neutrally stable operators,
small enough that any genuine crossing (always orders of magnitude
larger) is caught.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pointcloud import Domain, GridGenConfig, build_neighborhoods, generate_grid
from .schemes import SpatialScheme, build_scheme, euler_timestep
from .timeint import resolve_tableau

UNSTABLE_TOL = 1e-13


def assemble(scheme: SpatialScheme) -> np.ndarray:
    """Dense matrix of a linear scheme, row i = d(rhs_i)/du.
    Raises SchemeNotLinear for schemes without an operator."""
    return scheme.operator.toarray()


def eigenvalues(scheme_or_matrix) -> np.ndarray:
    if isinstance(scheme_or_matrix, SpatialScheme):
        scheme_or_matrix = assemble(scheme_or_matrix)
    return np.linalg.eigvals(np.asarray(scheme_or_matrix))


def max_real(eigs: np.ndarray) -> float:
    return float(np.max(eigs.real))


def is_unstable(eigs: np.ndarray, tol: float = UNSTABLE_TOL) -> bool:
    return max_real(eigs) > tol


@dataclass(frozen=True)
class SpectrumReport:
    scheme_id: str
    n: int
    eigs: np.ndarray
    max_real: float
    dt_euler: float

    @property
    def unstable(self) -> bool:
        return self.max_real > UNSTABLE_TOL


def spectrum(scheme: SpatialScheme, alpha=None) -> SpectrumReport:
    eigs = eigenvalues(scheme)
    pinned_idx = np.flatnonzero(scheme.pinned)
    dt = euler_timestep(scheme.cloud, scheme.a, alpha=alpha,
                        pinned=pinned_idx if pinned_idx.size else None)
    return SpectrumReport(scheme_id=scheme.id, n=scheme.cloud.n,
                          eigs=eigs, max_real=max_real(eigs), dt_euler=dt)


@dataclass(frozen=True)
class SensitivityRow:
    scheme_id: str
    n: int
    r: float
    n_grids: int
    n_unstable: int
    worst_max_real: float

    @property
    def pct_unstable(self) -> float:
        return 100.0 * self.n_unstable / self.n_grids


def sensitivity_study(scheme_ids, domain: Domain, n_values, r_factors,
                      n_grids: int, master_seed: int, a=None,
                      alpha=None) -> list:
    """Fraction of random grids with an unstable operator, per scheme,
    grid size, and perturbation amplitude.

    r_factors are perturbation amplitudes as fractions of dx (0.5 is
    the worst case: points may collide up to roundoff).  Every (scheme)
    cell of a given (n, r) sees the same n_grids clouds, seeded by
    splitting master_seed, so schemes are compared on identical
    geometry.
    """
    if a is None:
        a = 1.0 if domain.dim == 1 else (1.0, 1.0)
    r_factors = [float(r) for r in np.atleast_1d(r_factors)]
    n_values = [int(n) for n in np.atleast_1d(n_values)]
    cells = [(n, rf) for n in n_values for rf in r_factors]
    children = np.random.SeedSequence(master_seed).spawn(len(cells) * n_grids)
    rows = []
    for ci, (n, rf) in enumerate(cells):
        dx = (domain.hi - domain.lo) / n if domain.periodic \
            else (domain.hi - domain.lo) / (n - 1)
        clouds = []
        for g in range(n_grids):
            seed = children[ci * n_grids + g]
            cloud = generate_grid(domain, GridGenConfig(n, rf * dx, seed))
            clouds.append(build_neighborhoods(cloud))
        for sid in scheme_ids:
            n_unst = 0
            worst = -np.inf
            for cloud in clouds:
                mr = max_real(eigenvalues(build_scheme(sid, cloud, a, alpha=alpha)))
                worst = max(worst, mr)
                if mr > UNSTABLE_TOL:
                    n_unst += 1
            rows.append(SensitivityRow(scheme_id=sid, n=n, r=rf * dx,
                                       n_grids=n_grids, n_unstable=n_unst,
                                       worst_max_real=worst))
    return rows


def rk_stability_boundary(tableau, n_rays: int = 256) -> np.ndarray:
    """Boundary of {z : |R(z)| <= 1} for an explicit RK method, as an
    (n_rays, 2) array of (re, im) samples.

    R has R(0)=1 with the region locally left of the origin, and every
    standard explicit region is star-shaped about z=-1, so the boundary
    is found by bisecting |R| = 1 along rays from that anchor.
    """
    tab = resolve_tableau(tableau)
    coeff = tab.stability_coefficients()[::-1]  # np.polyval wants high-to-low
    anchor = -1.0 + 0.0j

    def absr(z):
        return np.abs(np.polyval(coeff, z))

    pts = np.empty((n_rays, 2))
    for k, theta in enumerate(np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False)):
        d = np.exp(1j * theta)
        lo, hi = 0.0, 1.0
        while absr(anchor + hi * d) <= 1.0 and hi < 64.0:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if absr(anchor + mid * d) <= 1.0:
                lo = mid
            else:
                hi = mid
        z = anchor + lo * d
        pts[k] = (z.real, z.imag)
    return pts
