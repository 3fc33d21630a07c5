"""Timing comparison of the compiled kernels against the numpy
reference implementations, on sizes typical for the studies.

Run as: python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from meshless import kernels
from meshless.kernels import _ref
from meshless.pointcloud import (Domain, GridGenConfig, build_neighborhoods,
                                 generate_grid)
from meshless.schemes import build_scheme


def make_cloud(dim, n, seed):
    domain = Domain(-5.0, 5.0, dim)
    dx = domain.length / n
    cloud = generate_grid(domain, GridGenConfig(n, 0.5 * dx,
                                                np.random.SeedSequence(seed)))
    return build_neighborhoods(cloud)


def best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def weno_args(cloud, a):
    sch = build_scheme("weno2", cloud, a)
    rng = np.random.default_rng(0)
    u = rng.normal(size=cloud.n)
    if cloud.dim == 1:
        (ipl, ixl, rwl), (ipc, ixc, rwc), (ipr, ixr, rwr) = sch._stencils
        return "weno_rhs_1d", (u, sch.a[0], cloud.dx, sch.eps,
                               ipl, ixl, rwl, sch._acts[0], sch._dx_pat[0],
                               ipc, ixc, rwc, sch._acts[1], sch._dx_pat[1],
                               ipr, ixr, rwr, sch._acts[2], sch._dx_pat[2])
    stencils = [(ip, ix, rw, act) for (ip, ix, rw), act
                in zip(sch._stencils, sch._acts)]
    return "weno_rhs_2d", (u, sch.a[0], sch.a[1], cloud.dx, sch.eps,
                           stencils, sch._dx_pat, sch._dy_pat)


def mood_args(cloud):
    rng = np.random.default_rng(1)
    u_prev = rng.normal(size=cloud.n)
    u_cand = u_prev + rng.normal(scale=0.5, size=cloud.n)
    curv_x = rng.normal(size=cloud.n)
    curv_y = rng.normal(size=cloud.n) if cloud.dim == 2 else np.empty(0)
    return "mood_detect", (cloud.indptr, cloud.indices, u_prev, u_cand,
                           curv_x, curv_y, np.full(cloud.n, cloud.dx), True)


def main():
    if not kernels.HAVE_COMPILED:
        print("compiled extension not available; timing the reference only")
    cases = []
    for dim, n in ((1, 1000), (1, 10000), (2, 70), (2, 150)):
        cloud = make_cloud(dim, n, seed=dim * 10 + 1)
        cases.append((f"{dim}D n={cloud.n}", *weno_args(cloud, 1.0 if dim == 1
                                                        else (1.0, 1.0))))
        cases.append((f"{dim}D n={cloud.n}", *mood_args(cloud)))

    print(f"{'case':16s} {'kernel':12s} {'reference':>12s} {'compiled':>12s} "
          f"{'speedup':>8s}")
    for label, name, args in cases:
        t_ref = best_of(lambda: getattr(_ref, name)(*args))
        if kernels.HAVE_COMPILED:
            t_cmp = best_of(lambda: getattr(kernels, name)(*args))
            print(f"{label:16s} {name:12s} {t_ref * 1e3:10.3f}ms "
                  f"{t_cmp * 1e3:10.3f}ms {t_ref / t_cmp:7.1f}x")
        else:
            print(f"{label:16s} {name:12s} {t_ref * 1e3:10.3f}ms "
                  f"{'n/a':>12s} {'n/a':>8s}")


if __name__ == "__main__":
    main()
