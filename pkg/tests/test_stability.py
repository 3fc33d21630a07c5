"""Operator assembly, eigenvalue analysis, RK stability boundaries."""
import numpy as np
import pytest

from meshless.pointcloud import Domain, PointCloud, build_neighborhoods
from meshless.schemes import build_scheme
from meshless.stability import (UNSTABLE_TOL, assemble, eigenvalues,
                                is_unstable, max_real, rk_stability_boundary,
                                sensitivity_study, spectrum)
from meshless.timeint import resolve_tableau

import oracles
from conftest import make_cloud


def test_circulant_upwind_matches_dft(cloud1d_uniform):
    sch = build_scheme("upwind1", cloud1d_uniform, 1.0)
    A = assemble(sch)
    lam = oracles.circulant_eigs(A[0])
    eig = eigenvalues(sch)
    assert oracles.set_distance(lam, eig) < 1e-10


@pytest.mark.parametrize("dim,sid", [(1, "upwind1"), (1, "muscl2"),
                                     (2, "positive2d"), (2, "muscl1")])
def test_assemble_matches_evaluate(dim, sid):
    cloud = make_cloud(dim, 40 if dim == 1 else 10, seed=50)
    a = 1.0 if dim == 1 else (1.0, 1.0)
    sch = build_scheme(sid, cloud, a)
    A = assemble(sch)
    rng = np.random.default_rng(51)
    scale = np.abs(A).max()
    for _ in range(20):
        u = rng.normal(size=cloud.n)
        assert np.abs(A @ u - sch.evaluate(u)).max() < 1e-12 * scale
    # unit probes recover columns exactly up to matvec rounding
    e = np.zeros(cloud.n)
    e[3] = 1.0
    assert np.abs(A[:, 3] - sch.evaluate(e)).max() < 1e-13 * scale


def test_operator_row_sums_vanish(cloud1d, cloud2d):
    for cloud, sid in ((cloud1d, "muscl4"), (cloud2d, "muscl2")):
        a = 1.0 if cloud.dim == 1 else (1.0, 1.0)
        A = assemble(build_scheme(sid, cloud, a))
        assert np.abs(A.sum(axis=1)).max() < 1e-11 * np.abs(A).max()


def test_permutation_invariance():
    cloud = make_cloud(1, 36, seed=52)
    sch = build_scheme("muscl2", cloud, 1.0)
    A = assemble(sch)
    rng = np.random.default_rng(53)
    perm = rng.permutation(cloud.n)
    shuffled = PointCloud(domain=cloud.domain, points=cloud.points[perm],
                          dx=cloud.dx, h_max=cloud.h_max, r=cloud.r)
    shuffled = build_neighborhoods(shuffled)
    A2 = assemble(build_scheme("muscl2", shuffled, 1.0))
    scale = np.abs(A).max()
    assert np.abs(A2 - A[np.ix_(perm, perm)]).max() < 1e-12 * scale
    assert oracles.set_distance(eigenvalues(A2), eigenvalues(A)) < 1e-10


def test_eigen_residual(cloud1d):
    A = assemble(build_scheme("muscl2", cloud1d, 1.0))
    w, V = np.linalg.eig(A)
    assert np.abs(A @ V - V @ np.diag(w)).max() < 1e-8


def test_spectrum_report(cloud1d):
    rep = spectrum(build_scheme("upwind1", cloud1d, 1.0))
    assert rep.scheme_id == "upwind1"
    assert rep.n == cloud1d.n
    assert rep.max_real == max_real(rep.eigs)
    assert rep.dt_euler > 0
    assert not rep.unstable   # first-order upwind is unconditionally stable


def test_unstable_threshold_is_strict():
    assert is_unstable(np.array([1.1e-13 + 0j]))
    assert not is_unstable(np.array([0.9e-13 + 0j]))
    assert not is_unstable(np.array([1e-13 + 0j]))   # strict inequality
    assert UNSTABLE_TOL == 1e-13


def test_rk_boundary_euler_is_unit_circle():
    pts = rk_stability_boundary("euler", n_rays=64)
    z = pts[:, 0] + 1j * pts[:, 1]
    assert np.abs(np.abs(z + 1.0) - 1.0).max() < 1e-10


@pytest.mark.parametrize("name,crossing", [("rk3", -2.5127), ("rk4", -2.7853)])
def test_rk_boundary_real_axis_crossing(name, crossing):
    pts = rk_stability_boundary(name, n_rays=512)
    on_axis = pts[(np.abs(pts[:, 1]) < 1e-9) & (pts[:, 0] < -1.0)]
    assert len(on_axis) >= 1
    assert abs(on_axis[0, 0] - crossing) < 5e-5


@pytest.mark.parametrize("name", ["euler", "rk2", "rk3", "rk4"])
def test_rk_boundary_has_unit_amplification(name):
    tab = resolve_tableau(name)
    coeff = tab.stability_coefficients()
    pts = rk_stability_boundary(name, n_rays=128)
    z = pts[:, 0] + 1j * pts[:, 1]
    R = np.polyval(coeff[::-1], z)
    assert np.abs(np.abs(R) - 1.0).max() < 1e-9


def test_sensitivity_study_separates_schemes():
    rows = sensitivity_study(["upwind1", "muscl3"], Domain(-5.0, 5.0, 1),
                             n_values=[50], r_factors=[0.5], n_grids=5,
                             master_seed=0)
    by_id = {r.scheme_id: r for r in rows}
    assert by_id["upwind1"].n_unstable == 0
    assert by_id["upwind1"].pct_unstable == 0.0
    assert by_id["muscl3"].n_unstable == 5
    assert by_id["muscl3"].pct_unstable == 100.0
    for r in rows:
        assert r.n == 50 and r.n_grids == 5
        assert r.r == pytest.approx(0.5 * 10.0 / 50)
    assert by_id["muscl3"].worst_max_real > UNSTABLE_TOL


def test_sensitivity_study_deterministic():
    args = (["upwind2"], Domain(-5.0, 5.0, 1))
    kw = dict(n_values=[40], r_factors=[0.3], n_grids=3, master_seed=7)
    r1 = sensitivity_study(*args, **kw)
    r2 = sensitivity_study(*args, **kw)
    assert r1[0].worst_max_real == r2[0].worst_max_real
