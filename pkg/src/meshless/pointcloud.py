"""Irregular point clouds on periodic boxes.

Grids are uniform lattices with a bounded random jitter applied to every
coordinate,

    x_i = lo + dx*(i - 1) + r*(2*p - 1),    p ~ U[0, 1),

so that for r <= dx/2 points keep their lattice ordering and can never
collide.  The jitter is drawn from a PCG64 generator seeded explicitly;
a grid is fully determined by (domain, n, r, seed).

Neighborhoods are fixed-radius: C_i collects every other point within
h_max of x_i, using minimal-image distances on periodic axes.  All
downstream operators (least-squares fits, schemes, limiters) consume the
CSR arrays built here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Closed-ball membership with a tiny relative slack: on exactly uniform
# lattices the default radii (3.5*dx, sqrt(34)*dx) produce distance ties
# that must land inside the ball regardless of how the squared distance
# was rounded.
NEIGHBOR_TIE_REL = 1e-12

DEFAULT_HMAX_FACTOR = {1: 3.5, 2: np.sqrt(34.0)}


class DegenerateGrid(ValueError):
    """Raised when a generated or loaded grid contains duplicate points."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box [lo, hi]^dim, periodic or not as a whole."""

    lo: float
    hi: float
    dim: int
    periodic: bool = True

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class GridGenConfig:
    """Lattice resolution n (points per axis), jitter amplitude r, seed."""

    n: int
    r: float
    seed: int


@dataclass
class PointCloud:
    domain: Domain
    points: np.ndarray          # (N, dim)
    dx: float                   # base lattice spacing
    h_max: float                # neighborhood radius
    r: float = 0.0
    seed: int | None = None
    indptr: np.ndarray | None = field(default=None, repr=False)
    indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def neighbors(self, i: int) -> np.ndarray:
        if self.indptr is None:
            raise ValueError("neighborhoods not built; call build_neighborhoods")
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


def periodic_delta(domain: Domain, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Displacement y - x, minimal-image on periodic domains.

    Broadcasts over leading axes; the trailing axis is the coordinate
    axis.  On periodic domains each component is wrapped into
    [-L/2, L/2].
    """
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if domain.periodic:
        L = domain.length
        d = d - L * np.round(d / L)
    return d


def generate_grid(domain: Domain, cfg: GridGenConfig,
                  h_max: float | None = None) -> PointCloud:
    """Generate a jittered lattice on the domain.

    Parameters
    ----------
    domain : Domain
    cfg : GridGenConfig
        cfg.n is the point count per axis (N = n**dim total), cfg.r the
        jitter amplitude, constrained to 0 <= r <= dx/2.
    h_max : float, optional
        Neighborhood radius; defaults to 3.5*dx in 1D and sqrt(34)*dx in
        2D.

    Notes
    -----
    Jitter offsets come from a single ``rng.random((N, dim))`` block of a
    PCG64 generator seeded with cfg.seed; points are enumerated with the
    x index fastest (2D flat index k = iy*n + ix).  On periodic axes
    out-of-range coordinates wrap into [lo, hi); on non-periodic axes the
    two boundary nodes of each axis stay unperturbed so the domain
    endpoints remain grid points.
    """
    n = int(cfg.n)
    if n < 2:
        raise ValueError(f"need at least 2 points per axis, got {n}")
    if domain.periodic:
        dx = domain.length / n
    else:
        dx = domain.length / (n - 1)
    if not 0.0 <= cfg.r <= dx / 2 * (1 + 1e-12):
        raise ValueError(f"jitter r={cfg.r} outside [0, dx/2] with dx={dx}")

    axis = domain.lo + dx * np.arange(n)
    if domain.dim == 1:
        pts = axis[:, None].copy()
    elif domain.dim == 2:
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    else:
        raise ValueError(f"dim must be 1 or 2, got {domain.dim}")

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    offsets = cfg.r * (2.0 * rng.random(pts.shape) - 1.0)
    if not domain.periodic:
        # boundary nodes pinned to the domain edge on their axis
        on_edge = np.isclose(pts, domain.lo) | np.isclose(pts, domain.hi)
        offsets[on_edge] = 0.0
    pts = pts + offsets
    if domain.periodic:
        pts = domain.lo + np.mod(pts - domain.lo, domain.length)

    if h_max is None:
        h_max = DEFAULT_HMAX_FACTOR[domain.dim] * dx

    cloud = PointCloud(domain=domain, points=pts, dx=dx, h_max=float(h_max),
                       r=cfg.r, seed=cfg.seed)
    _reject_duplicates(cloud)
    return cloud


def _reject_duplicates(cloud: PointCloud) -> None:
    pts = cloud.points
    order = np.lexsort(pts.T[::-1])
    same = np.all(pts[order[1:]] == pts[order[:-1]], axis=1)
    if same.any():
        k = int(np.nonzero(same)[0][0])
        raise DegenerateGrid(
            f"duplicate points at indices {order[k]} and {order[k + 1]}")


def build_neighborhoods(cloud: PointCloud,
                        h_max: float | None = None) -> PointCloud:
    """Attach fixed-radius CSR neighbor lists to the cloud (in place).

    C_i = { j != i : ||x_j - x_i|| <= h_max }, minimal-image on periodic
    domains, closed ball with NEIGHBOR_TIE_REL slack.  Indices within a
    row are ascending.  Returns the cloud for chaining.
    """
    if h_max is not None:
        cloud.h_max = float(h_max)
    pts = cloud.points
    N = cloud.n
    cut2 = cloud.h_max * cloud.h_max * (1.0 + NEIGHBOR_TIE_REL)
    L = cloud.domain.length
    per = cloud.domain.periodic

    counts = np.empty(N, dtype=np.int64)
    blocks = []
    chunk = max(1, int(4_000_000 // max(N, 1)))
    for s in range(0, N, chunk):
        e = min(s + chunk, N)
        d = pts[s:e, None, :] - pts[None, :, :]
        if per:
            d -= L * np.round(d / L)
        d2 = np.einsum("ijk,ijk->ij", d, d)
        mask = d2 <= cut2
        mask[np.arange(e - s), np.arange(s, e)] = False
        counts[s:e] = mask.sum(axis=1)
        blocks.append(np.nonzero(mask)[1])

    cloud.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    cloud.indices = np.concatenate(blocks).astype(np.int32) if blocks else \
        np.empty(0, dtype=np.int32)
    return cloud


def edge_arrays(cloud: PointCloud):
    """Directed edge view of the neighbor CSR: (src, dst, delta).

    One edge per (i, j in C_i); delta is the minimal-image displacement
    x_j - x_i, shape (E, dim).
    """
    if cloud.indptr is None:
        raise ValueError("neighborhoods not built")
    counts = np.diff(cloud.indptr)
    src = np.repeat(np.arange(cloud.n, dtype=np.int32), counts)
    dst = cloud.indices
    delta = periodic_delta(cloud.domain, cloud.points[src], cloud.points[dst])
    return src, dst, delta


def upwind_masks(cloud: PointCloud, a) -> np.ndarray:
    """Boolean edge mask of the upwind subsets U_i = {j in C_i : a.d_ij < 0}.

    Points exactly perpendicular to the velocity (a.d == 0) are not
    upwind.  With a scalar-like 1D velocity this reduces to
    sign(a)*(x_j - x_i) < 0.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (cloud.dim,):
        raise ValueError(f"velocity shape {a.shape} does not match dim {cloud.dim}")
    if not np.linalg.norm(a) > 0:
        raise ValueError("velocity must be nonzero")
    _, _, delta = edge_arrays(cloud)
    return delta @ a < 0.0


def directional_masks(cloud: PointCloud) -> dict[str, np.ndarray]:
    """Boolean edge masks of the coordinate-direction stencils.

    1D: left/right by the sign of dx_ij.  2D adds bottom/top by the sign
    of dy_ij.  Zero displacement along the splitting axis goes to the
    positive side (right / top), so left|right and bottom|top each
    partition C_i exactly.
    """
    _, _, delta = edge_arrays(cloud)
    out = {"left": delta[:, 0] < 0.0, "right": delta[:, 0] >= 0.0}
    if cloud.dim == 2:
        out["bottom"] = delta[:, 1] < 0.0
        out["top"] = delta[:, 1] >= 0.0
    return out


def masked_csr(cloud: PointCloud, mask: np.ndarray):
    """Restrict the neighbor CSR to edges selected by a boolean mask."""
    counts = np.diff(cloud.indptr)
    row = np.repeat(np.arange(cloud.n), counts)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(
        row[mask], minlength=cloud.n))]).astype(np.int64)
    return indptr, cloud.indices[mask]


def cell_sizes(cloud: PointCloud) -> np.ndarray:
    """Per-point cell length scale.

    1D: delta_i = (x_{i+1} - x_{i-1})/2 over index neighbors, with the
    periodic wrap (the index ring); on non-periodic domains the two
    boundary points take their half cell up to the domain edge, so the
    sizes always telescope to the domain length.  2D: the base lattice
    spacing dx for every point.
    """
    if cloud.dim == 2:
        return np.full(cloud.n, cloud.dx)
    x = cloud.points[:, 0]
    if cloud.domain.periodic:
        nxt = np.roll(x, -1)
        prv = np.roll(x, 1)
        d = periodic_delta(cloud.domain, prv, nxt)
        return 0.5 * d
    sizes = np.empty(cloud.n)
    sizes[1:-1] = 0.5 * (x[2:] - x[:-2])
    sizes[0] = 0.5 * (x[0] + x[1]) - cloud.domain.lo
    sizes[-1] = cloud.domain.hi - 0.5 * (x[-2] + x[-1])
    return sizes


def quad_weights(cloud: PointCloud) -> np.ndarray:
    """Quadrature weights: cell lengths in 1D, dx^2 per point in 2D."""
    if cloud.dim == 1:
        return cell_sizes(cloud)
    return np.full(cloud.n, cloud.dx * cloud.dx)


# ---------------------------------------------------------------------------
# grid CSV round-trip

def dump_grid(cloud: PointCloud, path) -> None:
    """Write the cloud as CSV: a dim,N,hmax,dx header block then one
    index,x[,y] row per point with 17 significant digits."""
    cols = "index,x" if cloud.dim == 1 else "index,x,y"
    with open(path, "w") as f:
        f.write("dim,N,hmax,dx\n")
        f.write("%d,%d,%.17g,%.17g\n" % (cloud.dim, cloud.n,
                                         cloud.h_max, cloud.dx))
        f.write(cols + "\n")
        for i, p in enumerate(cloud.points, start=1):
            f.write("%d,%s\n" % (i, ",".join("%.17g" % c for c in p)))


def load_grid(path, domain: Domain | None = None) -> PointCloud:
    """Read a grid CSV written by dump_grid and rebuild neighborhoods.

    The file does not carry the domain; pass one explicitly or get the
    default box [-5, 5]^dim, periodic.
    """
    with open(path) as f:
        header = f.readline().strip()
        if header != "dim,N,hmax,dx":
            raise ValueError(f"unexpected grid header: {header!r}")
        dim_s, n_s, hmax_s, dx_s = f.readline().strip().split(",")
        dim, N = int(dim_s), int(n_s)
        h_max, dx = float(hmax_s), float(dx_s)
        f.readline()  # column names
        pts = np.empty((N, dim))
        for k in range(N):
            parts = f.readline().strip().split(",")
            if int(parts[0]) != k + 1:
                raise ValueError(f"grid rows out of order at line {k + 4}")
            pts[k] = [float(v) for v in parts[1:]]
    if domain is None:
        domain = Domain(-5.0, 5.0, dim, periodic=True)
    if domain.dim != dim:
        raise ValueError(f"domain dim {domain.dim} != file dim {dim}")
    cloud = PointCloud(domain=domain, points=pts, dx=dx, h_max=h_max)
    _reject_duplicates(cloud)
    return build_neighborhoods(cloud)
