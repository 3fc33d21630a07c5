"""Pure-numpy reference kernels.

Same signatures as the compiled extension in _core.pyx; used as the
import-time fallback when the extension is unavailable (or when
MESHLESS_PURE_PYTHON is set) and as the comparison branch of the kernel
benchmark.  Derivative rows arrive diagonal-folded, so a plain CSR dot
of a row yields sum_j c_ij (u_j - u_i).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _csr_dots(indptr, indices, rows, u):
    """Apply each folded derivative row matrix to u: (n_derivs, N)."""
    n = len(indptr) - 1
    out = np.empty((rows.shape[0], n))
    for k in range(rows.shape[0]):
        m = sp.csr_matrix((rows[k], indices, indptr), shape=(n, len(u)),
                          copy=False)
        out[k] = m @ u
    return out


def weno_rhs_1d(u, a, dx, eps,
                indptr_l, idx_l, rows_l, act_l, d_l,
                indptr_c, idx_c, rows_c, act_c, d_c,
                indptr_r, idx_r, rows_r, act_r, d_r):
    """Nonlinearly weighted first derivative, three directional stencils.

    rows_* holds (d1, d2) folded rows; act_* flags stencils with enough
    points; d_* is the upwind pattern weight of the stencil.  Smoothness
    enters through (d1^2 dx^2 + d2^2 dx^4 + eps)^2.
    """
    dx2 = dx * dx
    dx4 = dx2 * dx2
    tot = 0.0
    der = 0.0
    for indptr, idx, rows, act, d in (
            (indptr_l, idx_l, rows_l, act_l, d_l),
            (indptr_c, idx_c, rows_c, act_c, d_c),
            (indptr_r, idx_r, rows_r, act_r, d_r)):
        if d == 0.0:
            continue
        g = _csr_dots(indptr, idx, rows, u)
        ind = g[0] ** 2 * dx2 + g[1] ** 2 * dx4 + eps
        beta = np.where(act.astype(bool), d / (ind * ind), 0.0)
        tot = tot + beta
        der = der + beta * g[0]
    return -a * der / tot


def weno_rhs_2d(u, ax, ay, dx, eps, stencils, d_x, d_y):
    """Per-axis weighted first derivatives from five directional stencils.

    stencils is a sequence of five (indptr, indices, rows, active)
    tuples ordered left, right, bottom, top, center, where rows holds
    the folded (dx, dy, dxx, dyy, dxy) coefficient rows.  d_x / d_y are
    the per-stencil upwind pattern weights of the x and y combinations
    (zero for stencils outside the combination).  Both axes share the
    per-stencil smoothness indicator, which includes the mixed term.
    """
    dx2 = dx * dx
    dx4 = dx2 * dx2
    totx = 0.0
    derx = 0.0
    toty = 0.0
    dery = 0.0
    for s, (indptr, idx, rows, act) in enumerate(stencils):
        if d_x[s] == 0.0 and d_y[s] == 0.0:
            continue
        g = _csr_dots(indptr, idx, rows, u)
        ind = (g[0] ** 2 * dx2 + g[1] ** 2 * dx2
               + g[2] ** 2 * dx4 + g[3] ** 2 * dx4
               + g[4] ** 2 * dx4 + eps)
        w = np.where(act.astype(bool), 1.0 / (ind * ind), 0.0)
        if d_x[s] != 0.0:
            bx = d_x[s] * w
            totx = totx + bx
            derx = derx + bx * g[0]
        if d_y[s] != 0.0:
            by = d_y[s] * w
            toty = toty + by
            dery = dery + by * g[1]
    return -(ax * derx / totx + ay * dery / toty)


def _group_minmax(indptr, indices, center, values):
    """Min and max of values over {i} union C_i, per point."""
    counts = np.diff(indptr)
    neigh = values[indices]
    has = counts > 0
    starts = indptr[:-1].copy()
    starts[~has] = 0  # keep reduceat happy; masked out below
    mn = np.minimum.reduceat(neigh, starts) if len(neigh) else \
        np.full(len(counts), np.inf)
    mx = np.maximum.reduceat(neigh, starts) if len(neigh) else \
        np.full(len(counts), -np.inf)
    mn = np.where(has, mn, np.inf)
    mx = np.where(has, mx, -np.inf)
    return np.minimum(mn, values[center]), np.maximum(mx, values[center])


def _u2_axis_ok(indptr, indices, center, curv, delta):
    cmin, cmax = _group_minmax(indptr, indices, center, curv)
    amin, amax = _group_minmax(indptr, indices, center, np.abs(curv))
    ratio_ok = (amax == 0.0) | (amin >= 0.5 * amax)
    return (cmin * cmax > -delta) & (ratio_ok | (amax < delta))


def mood_detect(indptr, indices, u_prev, u_cand, curv_x, curv_y, delta,
                cascade):
    """Acceptance cascade: discrete max principle, then flat region,
    then relaxed curvature-extremum test (skipped unless cascade).

    curv_y is an empty array in 1D.  Returns (accept uint8, reason uint8)
    with reasons 0=dmp_ok 1=flat_region 2=u2_extremum 3=rejected.
    """
    center = np.arange(len(u_prev))
    mn, mx = _group_minmax(indptr, indices, center, u_prev)
    dmp = (mn <= u_cand) & (u_cand <= mx)

    reason = np.full(len(u_prev), 3, dtype=np.uint8)
    reason[dmp] = 0
    if cascade:
        flat = (mx - mn) <= delta ** 3
        u2 = _u2_axis_ok(indptr, indices, center, curv_x, delta)
        if len(curv_y):
            u2 &= _u2_axis_ok(indptr, indices, center, curv_y, delta)
        reason[~dmp & flat] = 1
        reason[~dmp & ~flat & u2] = 2
    accept = (reason < 3).astype(np.uint8)
    return accept, reason.astype(np.uint8)
