# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused WENO weighted derivatives and the MOOD
acceptance cascade.  Signatures mirror kernels._ref; see there for the
semantics."""

import numpy as np

cimport numpy as cnp


def weno_rhs_1d(double[::1] u, double a, double dx, double eps,
                long long[::1] indptr_l, int[::1] idx_l,
                double[:, ::1] rows_l, unsigned char[::1] act_l, double d_l,
                long long[::1] indptr_c, int[::1] idx_c,
                double[:, ::1] rows_c, unsigned char[::1] act_c, double d_c,
                long long[::1] indptr_r, int[::1] idx_r,
                double[:, ::1] rows_r, unsigned char[::1] act_r, double d_r):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] rhs = out
    cdef double dx2 = dx * dx
    cdef double dx4 = dx2 * dx2
    cdef Py_ssize_t i, k, s
    cdef long long lo, hi
    cdef double g1, g2, ind, beta, tot, der
    cdef long long[::1] indptr
    cdef int[::1] idx
    cdef double[:, ::1] rows
    cdef unsigned char[::1] act
    cdef double d

    for i in range(n):
        tot = 0.0
        der = 0.0
        for s in range(3):
            if s == 0:
                indptr = indptr_l; idx = idx_l; rows = rows_l
                act = act_l; d = d_l
            elif s == 1:
                indptr = indptr_c; idx = idx_c; rows = rows_c
                act = act_c; d = d_c
            else:
                indptr = indptr_r; idx = idx_r; rows = rows_r
                act = act_r; d = d_r
            if d == 0.0 or not act[i]:
                continue
            g1 = 0.0
            g2 = 0.0
            lo = indptr[i]
            hi = indptr[i + 1]
            for k in range(lo, hi):
                g1 += rows[0, k] * u[idx[k]]
                g2 += rows[1, k] * u[idx[k]]
            ind = g1 * g1 * dx2 + g2 * g2 * dx4 + eps
            beta = d / (ind * ind)
            tot += beta
            der += beta * g1
        rhs[i] = -a * der / tot
    return out


def weno_rhs_2d(double[::1] u, double ax, double ay, double dx, double eps,
                stencils, double[::1] d_x, double[::1] d_y):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] rhs = out
    cdef double dx2 = dx * dx
    cdef double dx4 = dx2 * dx2
    # unpack the five (indptr, indices, rows, active) stencil tuples
    cdef long long[::1] ip0, ip1, ip2, ip3, ip4
    cdef int[::1] ix0, ix1, ix2, ix3, ix4
    cdef double[:, ::1] rw0, rw1, rw2, rw3, rw4
    cdef unsigned char[::1] ac0, ac1, ac2, ac3, ac4
    ip0, ix0, rw0, ac0 = stencils[0][0], stencils[0][1], stencils[0][2], stencils[0][3]
    ip1, ix1, rw1, ac1 = stencils[1][0], stencils[1][1], stencils[1][2], stencils[1][3]
    ip2, ix2, rw2, ac2 = stencils[2][0], stencils[2][1], stencils[2][2], stencils[2][3]
    ip3, ix3, rw3, ac3 = stencils[3][0], stencils[3][1], stencils[3][2], stencils[3][3]
    ip4, ix4, rw4, ac4 = stencils[4][0], stencils[4][1], stencils[4][2], stencils[4][3]

    cdef Py_ssize_t i, k, s
    cdef long long lo, hi
    cdef double gx, gy, gxx, gyy, gxy, ind, w, bx, by
    cdef double totx, derx, toty, dery, dxs, dys
    cdef long long[::1] indptr
    cdef int[::1] idx
    cdef double[:, ::1] rows
    cdef unsigned char[::1] act

    for i in range(n):
        totx = 0.0
        derx = 0.0
        toty = 0.0
        dery = 0.0
        for s in range(5):
            dxs = d_x[s]
            dys = d_y[s]
            if dxs == 0.0 and dys == 0.0:
                continue
            if s == 0:
                indptr = ip0; idx = ix0; rows = rw0; act = ac0
            elif s == 1:
                indptr = ip1; idx = ix1; rows = rw1; act = ac1
            elif s == 2:
                indptr = ip2; idx = ix2; rows = rw2; act = ac2
            elif s == 3:
                indptr = ip3; idx = ix3; rows = rw3; act = ac3
            else:
                indptr = ip4; idx = ix4; rows = rw4; act = ac4
            if not act[i]:
                continue
            gx = 0.0
            gy = 0.0
            gxx = 0.0
            gyy = 0.0
            gxy = 0.0
            lo = indptr[i]
            hi = indptr[i + 1]
            for k in range(lo, hi):
                gx += rows[0, k] * u[idx[k]]
                gy += rows[1, k] * u[idx[k]]
                gxx += rows[2, k] * u[idx[k]]
                gyy += rows[3, k] * u[idx[k]]
                gxy += rows[4, k] * u[idx[k]]
            ind = (gx * gx * dx2 + gy * gy * dx2 + gxx * gxx * dx4
                   + gyy * gyy * dx4 + gxy * gxy * dx4 + eps)
            w = 1.0 / (ind * ind)
            if dxs != 0.0:
                bx = dxs * w
                totx += bx
                derx += bx * gx
            if dys != 0.0:
                by = dys * w
                toty += by
                dery += by * gy
        rhs[i] = -(ax * derx / totx + ay * dery / toty)
    return out


def mood_detect(long long[::1] indptr, int[::1] indices,
                double[::1] u_prev, double[::1] u_cand,
                double[::1] curv_x, double[::1] curv_y,
                double[::1] delta, bint cascade):
    cdef Py_ssize_t n = u_prev.shape[0]
    cdef cnp.ndarray[unsigned char, ndim=1] acc = np.empty(n, dtype=np.uint8)
    cdef cnp.ndarray[unsigned char, ndim=1] rsn = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] accept = acc
    cdef unsigned char[::1] reason = rsn
    cdef bint two_d = curv_y.shape[0] == n
    cdef Py_ssize_t i, k, j
    cdef long long lo, hi
    cdef double mn, mx, d, v
    cdef double cmin, cmax, amin, amax, av
    cdef bint ok, axis_ok
    cdef Py_ssize_t axis
    cdef double[::1] curv

    for i in range(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        mn = u_prev[i]
        mx = mn
        for k in range(lo, hi):
            v = u_prev[indices[k]]
            if v < mn:
                mn = v
            elif v > mx:
                mx = v
        if mn <= u_cand[i] <= mx:
            accept[i] = 1
            reason[i] = 0
            continue
        if not cascade:
            accept[i] = 0
            reason[i] = 3
            continue
        d = delta[i]
        if mx - mn <= d * d * d:
            accept[i] = 1
            reason[i] = 1
            continue
        ok = True
        for axis in range(2 if two_d else 1):
            curv = curv_x if axis == 0 else curv_y
            v = curv[i]
            cmin = v
            cmax = v
            av = -v if v < 0.0 else v
            amin = av
            amax = av
            for k in range(lo, hi):
                j = indices[k]
                v = curv[j]
                if v < cmin:
                    cmin = v
                if v > cmax:
                    cmax = v
                av = -v if v < 0.0 else v
                if av < amin:
                    amin = av
                if av > amax:
                    amax = av
            axis_ok = (cmin * cmax > -d) and \
                (amax == 0.0 or amin >= 0.5 * amax or amax < d)
            if not axis_ok:
                ok = False
                break
        if ok:
            accept[i] = 1
            reason[i] = 2
        else:
            accept[i] = 0
            reason[i] = 3
    return acc, rsn
