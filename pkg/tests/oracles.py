"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from the defining formulas with
dense numpy linear algebra (lstsq on the weighted design matrix), not
by calling into the production fitting or assembly code.  Stencil
structure (which points belong to a neighborhood) is shared input; the
numerics are not.
"""
import math

import numpy as np


def wrap(domain, d):
    """Minimal-image displacement components for periodic domains."""
    d = np.asarray(d, dtype=float)
    if domain.periodic:
        L = domain.hi - domain.lo
        d = d - L * np.round(d / L)
    return d


def deltas(cloud, i, J):
    return wrap(cloud.domain, cloud.points[J] - cloud.points[i])


def multi_indices(dim, degree):
    """All derivative multi-indices of total order 1..degree.

    Order matches meshless.mls (used only to align rows for
    comparison, never for numerics): ascending total order, then
    lexicographic in the exponent tuple.
    """
    out = []
    for order in range(1, degree + 1):
        if dim == 1:
            out.append((order,))
        else:
            for ax in range(order, -1, -1):
                out.append((ax, order - ax))
    return out


def lstsq_rows(cloud, i, J, degree, alpha):
    """Difference-coefficient rows via QR least squares on the weighted
    design matrix; returns (multi-index list, rows array over J)."""
    D = deltas(cloud, i, J)
    mi = multi_indices(cloud.dim, degree)
    P = np.empty((len(J), len(mi)))
    for c, d in enumerate(mi):
        col = np.ones(len(J))
        for ax, e in enumerate(d):
            col = col * D[:, ax] ** e / math.factorial(e)
        P[:, c] = col
    w = np.exp(-alpha * (D * D).sum(axis=1))
    sw = np.sqrt(w)
    # theta = C (u_J - u_i) with C = argmin ||sqrt(W)(P^T C^T - I)||_F
    C, *_ = np.linalg.lstsq(sw[:, None] * P, np.diag(sw), rcond=None)
    return mi, C


def apply_rows(mi, C, func, cloud, i, J):
    """Evaluate the fitted derivatives of a callable on the stencil."""
    ui = func(cloud.points[i][None, :])[0]
    uj = func(cloud.points[i][None, :] + deltas(cloud, i, J))
    return {d: C[k] @ (uj - ui) for k, d in enumerate(mi)}


# ---------------------------------------------------------------------------
# MUSCL midpoint reconstruction, dense assembly


def muscl_matrix(cloud, a, degree, alpha):
    """Dense rhs operator from first principles: per-edge midpoint
    reconstruction from the upwind side, flux weights from the fitted
    first-derivative rows, tie edges averaged."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    n = cloud.n
    M = np.zeros((n, n))
    fits = []
    for i in range(n):
        J = cloud.neighbors(i)
        fits.append((J,) + lstsq_rows(cloud, i, J, degree, alpha))

    def recon_row(src, offset):
        # row vector over all points giving the reconstruction at
        # x_src + offset from the fit at src
        J, mi, C = fits[src]
        r = np.zeros(n)
        r[src] = 1.0
        for k, d in enumerate(mi):
            phi = 1.0
            for ax, e in enumerate(d):
                phi = phi * offset[ax] ** e / math.factorial(e)
            r[J] += phi * C[k]
            r[src] -= phi * C[k].sum()
        return r

    for i in range(n):
        J, mi, C = fits[i]
        D = deltas(cloud, i, J)
        first = [C[mi.index(d)] for d in
                 ([(1,)] if cloud.dim == 1 else [(1, 0), (0, 1)])]
        kappa = sum(a[ax] * first[ax] for ax in range(cloud.dim))
        for col, j in enumerate(J):
            s = float(D[col] @ a)
            if s > 0.0:
                r = recon_row(i, 0.5 * D[col])
            elif s < 0.0:
                r = recon_row(j, -0.5 * D[col])
            else:
                r = 0.5 * (recon_row(i, 0.5 * D[col])
                           + recon_row(j, -0.5 * D[col]))
            r[i] -= 1.0
            M[i] += -2.0 * kappa[col] * r
    return M


# ---------------------------------------------------------------------------
# WENO blended derivative


def _directional(cloud, i, ax, side):
    J = cloud.neighbors(i)
    D = deltas(cloud, i, J)
    if side == "minus":
        keep = D[:, ax] < 0.0
    elif side == "plus":
        keep = D[:, ax] >= 0.0
    else:
        keep = np.ones(len(J), dtype=bool)
    return J[keep]


def weno_rhs(cloud, a, u, eps, alpha):
    """Blended upwind derivative per the weight and indicator formulas.

    Per axis three stencils (negative side, central, positive side);
    degree-2 fits; the shared smoothness indicator is the weighted sum
    of squared first derivatives times dx^2 and squared second
    derivatives times dx^4; pattern weights 0.5 upwind, 0.5 central,
    0 downwind.  Stencils below the monomial count (2 in 1D, 5 in 2D)
    drop out.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    dim = cloud.dim
    dx2 = cloud.dx ** 2
    dx4 = dx2 * dx2
    min_pts = 2 if dim == 1 else 5
    rhs = np.zeros(cloud.n)
    for i in range(cloud.n):
        total = 0.0
        for ax in range(dim):
            if a[ax] > 0:
                dpat = {"minus": 0.5, "center": 0.5, "plus": 0.0}
            elif a[ax] < 0:
                dpat = {"minus": 0.0, "center": 0.5, "plus": 0.5}
            else:
                continue
            tot, der = 0.0, 0.0
            for side, dk in dpat.items():
                if dk == 0.0:
                    continue
                J = _directional(cloud, i, ax, side)
                if len(J) < min_pts:
                    continue
                mi, C = lstsq_rows(cloud, i, J, 2, alpha)
                du = u[J] - u[i]
                th = {d: C[k] @ du for k, d in enumerate(mi)}
                if dim == 1:
                    ind = th[(1,)] ** 2 * dx2 + th[(2,)] ** 2 * dx4
                    g = th[(1,)]
                else:
                    ind = (th[(1, 0)] ** 2 + th[(0, 1)] ** 2) * dx2 \
                        + (th[(2, 0)] ** 2 + th[(0, 2)] ** 2
                           + th[(1, 1)] ** 2) * dx4
                    g = th[(1, 0)] if ax == 0 else th[(0, 1)]
                beta = dk / (ind + eps) ** 2
                tot += beta
                der += beta * g
            total += a[ax] * der / tot
        rhs[i] = -total
    return rhs


# ---------------------------------------------------------------------------
# eigenvalue helpers


def circulant_eigs(row0):
    """Closed-form spectrum of a circulant matrix from its first row:
    lambda_k = sum_j c_j exp(2 pi i j k / N)."""
    return len(row0) * np.fft.ifft(row0)


def set_distance(A, B):
    """Max over one set of the distance to the nearest member of the
    other, both ways; robust to ordering unlike sorted pairing."""
    A = np.asarray(A).ravel()[:, None]
    B = np.asarray(B).ravel()[None, :]
    d = np.abs(A - B)
    return max(d.min(axis=1).max(), d.min(axis=0).max())
