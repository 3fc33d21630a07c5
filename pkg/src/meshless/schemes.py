"""Spatial semi-discretizations of du/dt = -a . grad(u) on point clouds.

Scheme ids:

======== === ===== ====================================================
id       dim order construction
======== === ===== ====================================================
upwind1   1    1   positivity-preserving weighted upwind difference
upwind2  1,2   2   gradient of a degree-2 fit on the upwind stencil
central  1,2  cfg  gradient of a central fit (unstable; for spectra)
positive2d 2   1   rotated-flux positive scheme on the full stencil
muscl1-4 1,2  1-4  midpoint reconstructions of a degree-m central fit
weno2    1,2   2   nonlinearly weighted directional-stencil gradients
======== === ===== ====================================================

Every scheme except weno2 is linear in u, so construction assembles a
sparse operator L once and evaluate() is a matvec; `operator` exposes L
for the eigenvalue studies.  weno2 evaluates through the fused kernels
in meshless.kernels.

The MUSCL family reconstructs the solution at edge midpoints from the
upwind side: u_ij is the Taylor evaluation at (x_i + x_j)/2 of the fit
around the donor point, the donor being i when a . (x_j - x_i) > 0, j
when negative, and both sides averaged on an exact tie.  The rhs then
doubles the midpoint differences,

    (du/dt)_i = -2 sum_j (a . c_ij) (u_ij - u_i),

with c_ij the first-derivative coefficient rows of the same fit.

Pinned points (Dirichlet boundaries) get identically zero rows across
all schemes; the integrator holds their values.
"""
from __future__ import annotations

from math import factorial

import numpy as np
import scipy.sparse as sp

from . import kernels, mls
from .pointcloud import PointCloud, directional_masks, edge_arrays, \
    masked_csr, upwind_masks

SCHEME_IDS = ("upwind1", "upwind2", "central", "positive2d",
              "muscl1", "muscl2", "muscl3", "muscl4", "weno2")

# smoothness regularization of weno2, by dimension
WENO_EPS_DEFAULT = {1: 1e-6, 2: 1e-12}


class EmptyUpwindStencil(ValueError):
    """A non-pinned point has no neighbors on its upwind side."""

    def __init__(self, points):
        self.points = list(points)
        super().__init__(f"empty upwind stencil at points {self.points[:8]}")


class AllStencilsDeactivated(ValueError):
    """No active stencil carries weight in a WENO combination."""

    def __init__(self, points):
        self.points = list(points)
        super().__init__(
            f"all weighted stencils deactivated at points {self.points[:8]}")


class SchemeNotLinear(TypeError):
    """Raised when a matrix is requested from a nonlinear scheme."""


def _as_velocity(a, dim):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (dim,):
        raise ValueError(f"velocity shape {a.shape} does not match dim {dim}")
    if not np.linalg.norm(a) > 0:
        raise ValueError("velocity must be nonzero")
    return a


def _pinned_mask(cloud, pinned):
    mask = np.zeros(cloud.n, dtype=bool)
    if pinned is not None:
        mask[np.asarray(pinned, dtype=int)] = True
    return mask


def _zero_rows(L, pinned_mask):
    if pinned_mask.any():
        keep = sp.diags((~pinned_mask).astype(float))
        L = (keep @ L).tocsr()
    return L


class SpatialScheme:
    """Common interface: evaluate(u), and `operator` when linear."""

    id: str
    order: int
    is_linear = True
    supports_mood = True

    def __init__(self, cloud: PointCloud, a, pinned=None):
        if cloud.indptr is None:
            raise ValueError("cloud has no neighborhoods")
        self.cloud = cloud
        self.a = _as_velocity(a, cloud.dim)
        self.pinned = _pinned_mask(cloud, pinned)
        self._L = None
        self._curv = None

    @property
    def dim(self) -> int:
        return self.cloud.dim

    @property
    def operator(self) -> sp.csr_matrix:
        if self._L is None:
            raise SchemeNotLinear(f"{self.id} has no operator matrix")
        return self._L

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        return self._L @ u

    @property
    def fallback_id(self) -> str:
        return "upwind1" if self.dim == 1 else "positive2d"

    def curvature_matrices(self):
        """Second-derivative operators feeding the MOOD curvature test,
        one per axis; built on demand from a degree-2 central fit when
        the scheme's own fit has no curvature rows."""
        if not self.supports_mood:
            return None
        if self._curv is None:
            cloud = self.cloud
            op = _central_fit(cloud, 2, self.pinned)
            self._curv = _curvature_from(op)
        return self._curv


def _resolved_alpha(cloud, alpha):
    return mls.default_alpha(cloud) if alpha is None else float(alpha)


def _central_fit(cloud, degree, pinned_mask, alpha=None):
    mode = "raise" if cloud.domain.periodic else "reduce"
    active = None if not pinned_mask.any() else ~pinned_mask
    return mls.fit(cloud, cloud.indptr, cloud.indices, degree,
                   mls.WeightConfig(_resolved_alpha(cloud, alpha)),
                   on_singular=mode, active=active)


def _curvature_from(op):
    if op.dim == 1:
        return (op.matrix((2,)),)
    return (op.matrix((2, 0)), op.matrix((0, 2)))


def _gradient_operator(op, a):
    """-a . grad as a sparse matrix from a fitted operator."""
    if op.dim == 1:
        return (-a[0]) * op.matrix((1,))
    return ((-a[0]) * op.matrix((1, 0)) - a[1] * op.matrix((0, 1))).tocsr()


# ---------------------------------------------------------------------------
# first-order positive schemes

class Upwind1(SpatialScheme):
    """1D positivity-preserving upwind scheme.

    (du/dt)_i = -a sum_{k in U_i} w_ik dx_ik (u_k - u_i)
                   / sum_{k in U_i} w_ik dx_ik^2,

    a convex-combination update for dt below max_timestep().
    """

    id = "upwind1"
    order = 1
    supports_mood = False

    def __init__(self, cloud, a, pinned=None, alpha=None):
        super().__init__(cloud, a, pinned)
        if cloud.dim != 1:
            raise ValueError("upwind1 is one-dimensional")
        alpha = _resolved_alpha(cloud, alpha)
        mask = upwind_masks(cloud, self.a)
        src, dst, delta = edge_arrays(cloud)
        src, dst, dx = src[mask], dst[mask], delta[mask, 0]
        w = mls.gaussian_weights(alpha, dx * dx)
        have = np.bincount(src, minlength=cloud.n) > 0
        bad = ~have & ~self.pinned
        if bad.any():
            raise EmptyUpwindStencil(np.nonzero(bad)[0])
        num = np.bincount(src, weights=w * dx * dx, minlength=cloud.n)
        den = np.bincount(src, weights=w * dx, minlength=cloud.n)
        a0 = self.a[0]
        coef = -a0 * w * dx / num[src]
        L = sp.coo_matrix((coef, (src, dst)), shape=(cloud.n, cloud.n))
        L = (L.tocsr() - sp.diags(np.bincount(
            src, weights=coef, minlength=cloud.n))).tocsr()
        self._L = _zero_rows(L, self.pinned)
        self._L.sort_indices()
        with np.errstate(divide="ignore", invalid="ignore"):
            dt = -num / (a0 * den)
        self._dt_euler = float(np.min(dt[have & ~self.pinned]))

    def max_timestep(self) -> float:
        """Largest forward-Euler step keeping the update a convex
        combination (equality point of the positivity bound)."""
        return self._dt_euler


class Positive2D(SpatialScheme):
    """2D rotated-flux positive first-order scheme.

    Gradient rows (alpha, beta) of a degree-1 central fit are rotated
    into the edge frame (n = normalized x_j - x_i, s = its normal);
    upwinding along both frame axes yields nonnegative update
    coefficients c_ij and (du/dt)_i = sum_j c_ij (u_j - u_i).
    """

    id = "positive2d"
    order = 1
    supports_mood = False

    def __init__(self, cloud, a, pinned=None, alpha=None):
        super().__init__(cloud, a, pinned)
        if cloud.dim != 2:
            raise ValueError("positive2d is two-dimensional")
        op = _central_fit(cloud, 1, self.pinned, alpha)
        src, dst, delta = edge_arrays(cloud)
        al = op.coeffs[op.deriv_index((1, 0))]
        be = op.coeffs[op.deriv_index((0, 1))]
        nrm = np.hypot(delta[:, 0], delta[:, 1])
        nx, ny = delta[:, 0] / nrm, delta[:, 1] / nrm
        abar = nx * al + ny * be
        bbar = -ny * al + nx * be
        an = self.a[0] * nx + self.a[1] * ny
        as_ = -self.a[0] * ny + self.a[1] * nx
        c = abar * (np.abs(an) - an) + (np.abs(bbar * as_) - bbar * as_)
        L = sp.coo_matrix((c, (src, dst)), shape=(cloud.n, cloud.n)).tocsr()
        L = (L - sp.diags(np.bincount(src, weights=c,
                                      minlength=cloud.n))).tocsr()
        self._L = _zero_rows(L, self.pinned)
        self._L.sort_indices()
        pos = np.bincount(src, weights=np.maximum(c, 0.0),
                          minlength=cloud.n)
        self._dt_euler = float(1.0 / np.max(pos[~self.pinned]))

    def max_timestep(self) -> float:
        return self._dt_euler


def euler_timestep(cloud, a, alpha=None, pinned=None) -> float:
    """Positivity time-step bound of the dimension's first-order scheme
    (upwind1 in 1D, positive2d in 2D); all integrations scale it by the
    CFL number."""
    if cloud.dim == 1:
        return Upwind1(cloud, a, pinned=pinned, alpha=alpha).max_timestep()
    return Positive2D(cloud, a, pinned=pinned, alpha=alpha).max_timestep()


# ---------------------------------------------------------------------------
# linear high-order schemes

class Upwind2(SpatialScheme):
    """Gradient of a degree-2 fit on the upwind stencil
    U_i = {j in C_i : a . (x_j - x_i) < 0}."""

    id = "upwind2"
    order = 2

    def __init__(self, cloud, a, pinned=None, alpha=None):
        super().__init__(cloud, a, pinned)
        mask = upwind_masks(cloud, self.a)
        indptr, indices = masked_csr(cloud, mask)
        counts = np.diff(indptr)
        bad = (counts == 0) & ~self.pinned
        if bad.any():
            raise EmptyUpwindStencil(np.nonzero(bad)[0])
        mode = "raise" if cloud.domain.periodic else "reduce"
        active = None if not self.pinned.any() else ~self.pinned
        op = mls.fit(cloud, indptr, indices, 2,
                     mls.WeightConfig(_resolved_alpha(cloud, alpha)),
                     on_singular=mode, active=active)
        self._L = _zero_rows(_gradient_operator(op, self.a), self.pinned)
        self._L.sort_indices()


class Central(SpatialScheme):
    """Gradient of a degree-`order` central fit; not stable under
    explicit time stepping, kept for the spectrum studies."""

    id = "central"

    def __init__(self, cloud, a, pinned=None, alpha=None, order=1):
        super().__init__(cloud, a, pinned)
        self.order = int(order)
        op = _central_fit(cloud, self.order, self.pinned, alpha)
        self._L = _zero_rows(_gradient_operator(op, self.a), self.pinned)
        self._L.sort_indices()


class Muscl(SpatialScheme):
    """Midpoint-reconstruction scheme of formal order m (degree-m fit)."""

    id: str

    def __init__(self, cloud, a, m, pinned=None, alpha=None):
        super().__init__(cloud, a, pinned)
        self.order = int(m)
        self.id = f"muscl{m}"
        op = _central_fit(cloud, m, self.pinned, alpha)
        self._fit = op
        self._L = _zero_rows(_muscl_matrix(cloud, self.a, op), self.pinned)
        self._L.sort_indices()

    def curvature_matrices(self):
        if self._curv is None:
            if self.order >= 2:
                self._curv = _curvature_from(self._fit)
            else:
                self._curv = super().curvature_matrices()
        return self._curv


def _muscl_matrix(cloud, a, op):
    """Assemble the midpoint-reconstruction operator by sparse algebra.

    With A = (edge -> source accumulation weighted by g_e = a . c_ij)
    and S the per-edge midpoint reconstruction row, the operator is
    L = -2 (A S - diag(A 1)).  A S splits into donor-selector terms,
    each a cheap N x N product, so the (edges x N) matrix S is never
    materialized.
    """
    src, dst, delta = edge_arrays(cloud)
    n, E = cloud.n, len(src)
    if op.dim == 1:
        g = a[0] * op.coeffs[op.deriv_index((1,))]
    else:
        g = a[0] * op.coeffs[op.deriv_index((1, 0))] + \
            a[1] * op.coeffs[op.deriv_index((0, 1))]
    adot = delta @ a
    ws = np.where(adot > 0, 1.0, np.where(adot < 0, 0.0, 0.5))
    wd = 1.0 - ws

    def from_src(v):
        return sp.diags(np.bincount(src, weights=v, minlength=n))

    def from_dst(v):
        return sp.coo_matrix((v, (src, dst)), shape=(n, n)).tocsr()

    AS = from_src(g * ws) + from_dst(g * wd)
    mats = op.matrices()
    for d in op.derivs:
        t = np.ones(E)
        for ax, p in enumerate(d):
            if p:
                t = t * (0.5 * delta[:, ax]) ** p / factorial(p)
        sign = (-1.0) ** sum(d)
        D = mats[d]
        AS = AS + (from_src(g * ws * t) + from_dst(g * wd * sign * t)) @ D
    L = -2.0 * (AS - sp.diags(np.bincount(src, weights=g, minlength=n)))
    return L.tocsr()


# ---------------------------------------------------------------------------
# weno

def _fold_csr(indptr, indices, rows):
    """Append the -sum_j c_ij diagonal entry to every row so a plain CSR
    dot applies the difference operator."""
    n = len(indptr) - 1
    counts = np.diff(indptr)
    indptr2 = (indptr + np.arange(n + 1)).astype(np.int64)
    nnz2 = int(indptr2[-1])
    indices2 = np.empty(nnz2, dtype=np.int32)
    rows2 = np.empty((rows.shape[0], nnz2))
    pos = np.arange(len(indices)) + np.repeat(np.arange(n), counts)
    dpos = indptr2[1:] - 1
    indices2[pos] = indices
    indices2[dpos] = np.arange(n)
    for m in range(rows.shape[0]):
        rows2[m, pos] = rows[m]
        rows2[m, dpos] = -np.bincount(np.repeat(np.arange(n), counts),
                                      weights=rows[m], minlength=n)
    return indptr2, indices2, np.ascontiguousarray(rows2)


class Weno2(SpatialScheme):
    """Directional-stencil scheme with data-dependent weights.

    Degree-2 fits on the left/right (plus bottom/top and full central)
    stencils produce candidate gradients; each candidate is weighted by
    its upwind pattern weight over the squared smoothness indicator

        (d1^2 dx^2 + d2^2 dx^4 [+ y and mixed terms] + eps)^2,

    dx being the base lattice spacing.  Stencils with fewer points than
    the degree-2 basis (or degenerate geometry) are deactivated; a point
    whose weighted stencils are all deactivated is an error unless
    pinned.
    """

    id = "weno2"
    order = 2
    is_linear = False
    supports_mood = False

    def __init__(self, cloud, a, pinned=None, alpha=None, eps=None):
        super().__init__(cloud, a, pinned)
        self.eps = WENO_EPS_DEFAULT[cloud.dim] if eps is None else float(eps)
        alpha = _resolved_alpha(cloud, alpha)
        masks = directional_masks(cloud)
        names = (("left", "center", "right") if cloud.dim == 1 else
                 ("left", "right", "bottom", "top", "center"))
        need = mls.monomial_count(cloud.dim, 2)
        self._stencils = []
        self._acts = []
        for name in names:
            if name == "center":
                indptr, indices = cloud.indptr, cloud.indices
            else:
                indptr, indices = masked_csr(cloud, masks[name])
            pre = (np.diff(indptr) >= need) & ~self.pinned
            op = mls.fit(cloud, indptr, indices, 2,
                         mls.WeightConfig(alpha),
                         on_singular="zero", active=pre)
            act = (op.point_degree == 2)
            fold = _fold_csr(op.indptr, op.indices, op.coeffs)
            self._stencils.append(fold)
            self._acts.append(np.ascontiguousarray(act, dtype=np.uint8))
        # center stencil stays formally active at pinned points: its rows
        # are zero there, which makes the weighted derivative zero
        # instead of 0/0.
        self._acts[-1][self.pinned] = 1

        if cloud.dim == 1:
            up = (0.5, 0.5, 0.0) if self.a[0] >= 0 else (0.0, 0.5, 0.5)
            self._d = {"left": up[0], "center": up[1], "right": up[2]}
            pat = np.array([self._d[nm] for nm in names])
            self._dx_pat = pat
            covered = np.zeros(cloud.n)
            for s, nm in enumerate(names):
                covered += pat[s] * self._acts[s]
        else:
            dx_pat = np.zeros(5)
            dy_pat = np.zeros(5)
            dx_pat[4] = dy_pat[4] = 0.5
            dx_pat[0 if self.a[0] >= 0 else 1] = 0.5
            dy_pat[2 if self.a[1] >= 0 else 3] = 0.5
            self._dx_pat = dx_pat
            self._dy_pat = dy_pat
            covered = np.minimum(dx_pat @ np.array(self._acts),
                                 dy_pat @ np.array(self._acts))
        dead = (covered == 0) & ~self.pinned
        if dead.any():
            raise AllStencilsDeactivated(np.nonzero(dead)[0])

    @property
    def operator(self):
        raise SchemeNotLinear("weno2 is nonlinear; no operator matrix")

    def evaluate(self, u):
        cloud = self.cloud
        if cloud.dim == 1:
            (ipl, ixl, rwl), (ipc, ixc, rwc), (ipr, ixr, rwr) = self._stencils
            rhs = kernels.weno_rhs_1d(
                u, self.a[0], cloud.dx, self.eps,
                ipl, ixl, rwl, self._acts[0], self._dx_pat[0],
                ipc, ixc, rwc, self._acts[1], self._dx_pat[1],
                ipr, ixr, rwr, self._acts[2], self._dx_pat[2])
        else:
            stencils = [(ip, ix, rw, act) for (ip, ix, rw), act
                        in zip(self._stencils, self._acts)]
            rhs = kernels.weno_rhs_2d(u, self.a[0], self.a[1], cloud.dx,
                                      self.eps, stencils,
                                      self._dx_pat, self._dy_pat)
        if self.pinned.any():
            rhs[self.pinned] = 0.0
        return rhs


# ---------------------------------------------------------------------------

def build_scheme(scheme_id: str, cloud: PointCloud, a, *, alpha=None,
                 weno_eps=None, central_order=1,
                 pinned=None) -> SpatialScheme:
    """Construct a scheme by id on a cloud with velocity a.

    alpha overrides the Gaussian weight exponent (default 1/dx^2 in 1D,
    6/h_max^2 in 2D); weno_eps the weno2 regularization; central_order
    the fit degree of the central scheme.  pinned lists Dirichlet points
    whose rows are zeroed.
    """
    if scheme_id not in SCHEME_IDS:
        raise ValueError(f"unknown scheme {scheme_id!r}; "
                         f"expected one of {SCHEME_IDS}")
    if scheme_id == "upwind1":
        return Upwind1(cloud, a, pinned, alpha)
    if scheme_id == "upwind2":
        return Upwind2(cloud, a, pinned, alpha)
    if scheme_id == "central":
        return Central(cloud, a, pinned, alpha, order=central_order)
    if scheme_id == "positive2d":
        return Positive2D(cloud, a, pinned, alpha)
    if scheme_id == "weno2":
        return Weno2(cloud, a, pinned, alpha, eps=weno_eps)
    m = int(scheme_id[-1])
    return Muscl(cloud, a, m, pinned, alpha)
