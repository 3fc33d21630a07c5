"""Compiled kernels against the numpy reference implementations."""
import os
import subprocess
import sys

import numpy as np
import pytest

from meshless import kernels
from meshless.kernels import _ref
from meshless.schemes import build_scheme

from conftest import make_cloud

needs_compiled = pytest.mark.skipif(
    not kernels.HAVE_COMPILED, reason="compiled extension not built")


def test_compiled_extension_present():
    # a silent fallback would make every equality test below vacuous
    if os.environ.get("MESHLESS_PURE_PYTHON", "") not in ("", "0"):
        pytest.skip("reference path forced via environment")
    assert kernels.HAVE_COMPILED


@needs_compiled
def test_weno1d_matches_reference():
    cloud = make_cloud(1, 80, seed=21)
    sch = build_scheme("weno2", cloud, 1.0)
    rng = np.random.default_rng(3)
    u = np.sin(cloud.points[:, 0]) + rng.normal(scale=0.2, size=cloud.n)
    (ipl, ixl, rwl), (ipc, ixc, rwc), (ipr, ixr, rwr) = sch._stencils
    args = (u, sch.a[0], cloud.dx, sch.eps,
            ipl, ixl, rwl, sch._acts[0], sch._dx_pat[0],
            ipc, ixc, rwc, sch._acts[1], sch._dx_pat[1],
            ipr, ixr, rwr, sch._acts[2], sch._dx_pat[2])
    got = kernels.weno_rhs_1d(*args)
    want = _ref.weno_rhs_1d(*args)
    assert np.allclose(got, want, rtol=1e-13, atol=1e-15)


@needs_compiled
def test_weno2d_matches_reference():
    cloud = make_cloud(2, 14, seed=22)
    sch = build_scheme("weno2", cloud, (1.0, -0.5))
    rng = np.random.default_rng(4)
    u = rng.normal(size=cloud.n)
    stencils = [(ip, ix, rw, act) for (ip, ix, rw), act
                in zip(sch._stencils, sch._acts)]
    args = (u, sch.a[0], sch.a[1], cloud.dx, sch.eps, stencils,
            sch._dx_pat, sch._dy_pat)
    got = kernels.weno_rhs_2d(*args)
    want = _ref.weno_rhs_2d(*args)
    assert np.allclose(got, want, rtol=1e-13, atol=1e-15)


@needs_compiled
@pytest.mark.parametrize("dim,cascade", [(1, True), (1, False),
                                         (2, True), (2, False)])
def test_mood_detect_matches_reference(dim, cascade):
    cloud = make_cloud(dim, 60 if dim == 1 else 10, seed=23)
    rng = np.random.default_rng(5)
    n = cloud.n
    u_prev = rng.normal(size=n)
    # half the candidates inside the local bounds, half outside
    u_cand = u_prev + rng.normal(scale=0.5, size=n)
    curv_x = rng.normal(size=n)
    curv_y = rng.normal(size=n) if dim == 2 else np.empty(0)
    delta = np.full(n, cloud.dx)
    args = (cloud.indptr, cloud.indices, u_prev, u_cand,
            curv_x, curv_y, delta, cascade)
    acc_c, rea_c = kernels.mood_detect(*args)
    acc_r, rea_r = _ref.mood_detect(*args)
    assert np.array_equal(acc_c, acc_r)
    assert np.array_equal(rea_c, rea_r)
    assert set(np.unique(rea_c)) <= ({0, 1, 2, 3} if cascade else {0, 3})


def test_env_var_forces_reference_path():
    code = ("import meshless.kernels as k, meshless.kernels._ref as r;"
            "assert not k.HAVE_COMPILED;"
            "assert k.weno_rhs_1d is r.weno_rhs_1d;"
            "assert k.mood_detect is r.mood_detect;"
            "print('ok')")
    env = dict(os.environ, MESHLESS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "ok"
