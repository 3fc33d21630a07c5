"""Weighted moving least squares derivative operators.

For every point i a polynomial without constant term is fitted to the
differences u_j - u_i over a stencil S_i, minimizing

    sum_j w_ij (u_j - u_i - sum_d theta_d (x_j - x_i)^d / d!)^2,

with Gaussian weights w_ij = exp(-alpha ||x_j - x_i||^2).  Because the
basis carries the Taylor factorials, the minimizer theta_d approximates
the derivative of u at x_i for the multi-index d.  The result is one
coefficient row per derivative and point, acting on differences:

    D^d u(x_i)  ~=  sum_j c^d_ij (u_j - u_i).

Rows reproduce polynomials up to the fitted degree exactly (up to
round-off): they are exact generalized finite differences.

The normal equations are assembled in coordinates scaled by h_max and
Jacobi-equilibrated before a pivoted dense solve; stencils whose
equilibrated Gram matrix has a reciprocal condition estimate below
RCOND_MIN (or too few points for the basis) are singular.  Callers
choose between raising and per-point degree reduction.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp

RCOND_MIN = 1e-12


class SingularStencil(ValueError):
    """A stencil cannot support the requested polynomial basis."""

    def __init__(self, points, degree):
        self.points = list(points)
        self.degree = degree
        super().__init__(
            f"singular degree-{degree} stencil at points {self.points[:8]}"
            + ("..." if len(self.points) > 8 else ""))


@dataclass(frozen=True)
class WeightConfig:
    """Gaussian weight exponent; w = exp(-alpha d^2)."""

    alpha: float


def default_alpha(cloud) -> float:
    # 1/dx^2 in 1D, 6/h_max^2 in 2D
    if cloud.dim == 1:
        return 1.0 / (cloud.dx * cloud.dx)
    return 6.0 / (cloud.h_max * cloud.h_max)


def gaussian_weights(alpha: float, d2: np.ndarray) -> np.ndarray:
    return np.exp(-alpha * d2)


def multi_indices(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Graded lexicographic multi-indices with 1 <= |d| <= degree.

    1D: (1,), (2,), ...  2D: (1,0), (0,1), (2,0), (1,1), (0,2), ...
    """
    out = []
    for total in range(1, degree + 1):
        if dim == 1:
            out.append((total,))
        else:
            for ax in range(total, -1, -1):
                out.append((ax, total - ax))
    return out


def monomial_count(dim: int, degree: int) -> int:
    return degree if dim == 1 else degree * (degree + 3) // 2


def deriv_name(d: tuple[int, ...]) -> str:
    if len(d) == 1:
        return "x" * d[0]
    return "x" * d[0] + "y" * d[1]


@dataclass
class DerivativeOperator:
    """Coefficient rows c^d_ij on a CSR stencil structure.

    coeffs has shape (len(derivs), nnz) and acts on differences; the
    folded sparse matrices returned by matrix()/matrices() include the
    -sum_j c_ij diagonal so a plain matvec applies the operator to a
    field.  point_degree records the per-point fitted degree (lower than
    degree only where degree reduction was requested and needed); rows
    of derivatives above a point's degree are zero.
    """

    dim: int
    degree: int
    derivs: tuple[tuple[int, ...], ...]
    indptr: np.ndarray
    indices: np.ndarray
    coeffs: np.ndarray
    point_degree: np.ndarray
    h_max: float

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def deriv_index(self, d) -> int:
        return self.derivs.index(tuple(d))

    def matrix(self, d) -> sp.csr_matrix:
        c = self.coeffs[self.deriv_index(d)]
        plain = sp.csr_matrix((c, self.indices, self.indptr),
                              shape=(self.n, self.n))
        rowsum = np.asarray(plain.sum(axis=1)).ravel()
        return (plain - sp.diags(rowsum)).tocsr()

    def matrices(self) -> dict[tuple[int, ...], sp.csr_matrix]:
        return {d: self.matrix(d) for d in self.derivs}

    def apply(self, d, u: np.ndarray) -> np.ndarray:
        return self.matrix(d) @ u

    def row(self, d, i: int):
        """Stencil indices and difference coefficients of point i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.coeffs[self.deriv_index(d), lo:hi]


def fit(cloud, indptr, indices, degree: int, weights: WeightConfig,
        on_singular: str = "raise",
        active: np.ndarray | None = None) -> DerivativeOperator:
    """Fit difference coefficient rows on the given CSR stencils.

    Parameters
    ----------
    cloud : PointCloud
    indptr, indices : CSR stencil structure (subset of the neighbor CSR)
    degree : polynomial degree of the fit (>= 1)
    weights : WeightConfig
    on_singular : "raise", "reduce" or "zero"
        "reduce" refits singular points at the largest solvable lower
        degree (zero rows above it) instead of raising; points that
        cannot support even degree 1 still raise.  "zero" leaves
        singular points with zero rows and point_degree 0.
    active : bool array, optional
        Points to fit; the rest keep zero rows and point_degree 0
        without being treated as errors (used for deactivated stencils
        and pinned boundary points).
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if on_singular not in ("raise", "reduce", "zero"):
        raise ValueError(f"on_singular: {on_singular!r}")
    from .pointcloud import periodic_delta

    N = len(indptr) - 1
    counts = np.diff(indptr)
    K = int(counts.max()) if N else 0
    derivs = multi_indices(cloud.dim, degree)
    M = len(derivs)

    # padded stencil view; pad slots point at the center and get weight 0
    slot = np.arange(K)[None, :]
    valid = slot < counts[:, None]
    padded = np.where(valid, 0, np.arange(N)[:, None])
    np.place(padded, valid, indices)
    delta = periodic_delta(cloud.domain, cloud.points[:, None, :],
                           cloud.points[padded])
    d2 = np.einsum("nkd,nkd->nk", delta, delta)
    w = np.where(valid, gaussian_weights(weights.alpha, d2), 0.0)

    t = delta / cloud.h_max
    P = np.empty((N, K, M))
    for m, d in enumerate(derivs):
        col = t[:, :, 0] ** d[0]
        if cloud.dim == 2 and d[1]:
            col = col * t[:, :, 1] ** d[1]
        P[:, :, m] = col

    coeffs = np.zeros((M, N, K))
    point_degree = np.zeros(N, dtype=np.int64)
    todo = np.arange(N) if active is None else np.nonzero(active)[0]
    q = degree
    while len(todo):
        Mq = monomial_count(cloud.dim, q)
        rows, ok = _solve_block(P[todo, :, :Mq], w[todo], valid[todo])
        coeffs[:Mq, todo[ok]] = np.transpose(rows[ok], (1, 0, 2))
        point_degree[todo[ok]] = q
        bad = todo[~ok]
        if len(bad) == 0:
            break
        if on_singular == "zero":
            break
        if on_singular == "raise" or q == 1:
            raise SingularStencil(bad, q)
        todo = bad
        q -= 1

    # undo the h_max scaling and restore the Taylor factorials
    h = cloud.h_max
    for m, d in enumerate(derivs):
        fac = factorial(d[0]) * (factorial(d[1]) if len(d) == 2 else 1)
        coeffs[m] *= fac / h ** sum(d)

    # scatter padded rows back into CSR order
    flat = np.empty((M, int(counts.sum())))
    for m in range(M):
        flat[m] = coeffs[m][valid]

    return DerivativeOperator(
        dim=cloud.dim, degree=degree, derivs=tuple(derivs),
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int32),
        coeffs=flat, point_degree=point_degree, h_max=h)


def _solve_block(P, w, valid):
    """Equilibrated normal-equation solve for a block of stencils.

    P: (n, K, M) scaled monomials, w: (n, K) weights (0 on pad slots).
    Returns (rows (n, M, K), ok (n,)) where ok flags well-conditioned
    solvable stencils; rows of failed stencils are unspecified.
    """
    n, K, M = P.shape
    enough = valid.sum(axis=1) >= M
    Pw = P * w[:, :, None]
    G = np.einsum("nkp,nkq->npq", Pw, P)
    diag = np.einsum("npp->np", G)
    ok = enough & (diag > 0.0).all(axis=1)
    s = np.where(diag > 0.0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    Gt = G * s[:, :, None] * s[:, None, :]
    sv = np.linalg.svd(Gt, compute_uv=False)
    with np.errstate(invalid="ignore", divide="ignore"):
        rcond = sv[:, -1] / sv[:, 0]
    ok &= np.isfinite(rcond) & (rcond >= RCOND_MIN)
    Gt[~ok] = np.eye(M)
    B = np.transpose(Pw, (0, 2, 1)) * s[:, :, None]     # (n, M, K), row-scaled
    Y = np.linalg.solve(Gt, B)
    # one iterative refinement pass in the equilibrated frame
    R = B - Gt @ Y
    Y += np.linalg.solve(Gt, R)
    rows = Y * s[:, :, None]
    return rows, ok


# ---------------------------------------------------------------------------
# operator CSV dump

def dump_operator(op: DerivativeOperator, path) -> None:
    """Write rows as CSV: i,j,c_<d>... (1-based indices, 17 digits)."""
    names = ",".join("c_" + deriv_name(d) for d in op.derivs)
    with open(path, "w") as f:
        f.write("i,j," + names + "\n")
        for i in range(op.n):
            lo, hi = op.indptr[i], op.indptr[i + 1]
            for k in range(lo, hi):
                vals = ",".join("%.17g" % op.coeffs[m, k]
                                for m in range(len(op.derivs)))
                f.write("%d,%d,%s\n" % (i + 1, op.indices[k] + 1, vals))
