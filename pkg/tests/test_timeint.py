"""Runge-Kutta stepping, screened stepping, and the integrate() driver."""
import math

import numpy as np
import pytest
import scipy.linalg

from meshless.mood import MoodConfig, MoodReport, REASON_DMP_OK, REASON_REJECTED
from meshless.schemes import build_scheme, euler_timestep
from meshless.timeint import (TABLEAUS, NonFiniteState, integrate,
                              mood_step, resolve_tableau, rk_step)

from conftest import make_cloud


def test_stability_coefficients_truncate_exponential():
    for name, tab in TABLEAUS.items():
        coeff = tab.stability_coefficients()
        want = np.array([1.0 / math.factorial(k) for k in range(tab.stages + 1)])
        assert np.allclose(coeff, want, atol=1e-15), name
        assert tab.order == tab.stages


@pytest.mark.parametrize("name", ["euler", "rk2", "rk3", "rk4"])
def test_single_step_order_against_matrix_exponential(name):
    tab = resolve_tableau(name)
    rng = np.random.default_rng(40)
    L = rng.normal(scale=0.5, size=(8, 8))
    u0 = rng.normal(size=8)
    errs = []
    for dt in (0.2, 0.1):
        got = rk_step(lambda u: L @ u, u0, dt, tab)
        want = scipy.linalg.expm(dt * L) @ u0
        errs.append(np.linalg.norm(got - want))
    order = np.log2(errs[0] / errs[1])
    assert abs(order - (tab.order + 1)) < 0.2, f"{name}: {order:.3f}"


def _const_detector(accept):
    def det(cloud, u_prev, u_cand, curv, cfg, delta=None):
        n = len(u_prev)
        code = REASON_DMP_OK if accept else REASON_REJECTED
        reason = np.full(n, code, dtype=np.uint8)
        acc = np.full(n, accept)
        return MoodReport(accepted=acc, reason=reason,
                          n_events=0 if accept else n)
    return det


def test_mood_step_accept_all_is_plain_rk_step(cloud1d):
    sch = build_scheme("muscl2", cloud1d, 1.0)
    fb = build_scheme("upwind1", cloud1d, 1.0)
    rng = np.random.default_rng(41)
    u = rng.normal(size=cloud1d.n)
    dt = 0.25 * euler_timestep(cloud1d, 1.0)
    tab = resolve_tableau("rk3")
    got, rep = mood_step(sch, fb, u, dt, tab, MoodConfig(),
                         detector=_const_detector(True))
    want = rk_step(sch.evaluate, u, dt, tab)
    assert np.array_equal(got, want)
    assert rep.n_events == 0


def test_mood_step_reject_all_is_fallback_euler(cloud1d):
    sch = build_scheme("muscl2", cloud1d, 1.0)
    fb = build_scheme("upwind1", cloud1d, 1.0)
    rng = np.random.default_rng(42)
    u = rng.normal(size=cloud1d.n)
    dt = 0.25 * euler_timestep(cloud1d, 1.0)
    got, rep = mood_step(sch, fb, u, dt, resolve_tableau("rk3"), MoodConfig(),
                         detector=_const_detector(False))
    want = u + dt * fb.evaluate(u)
    assert np.array_equal(got, want)
    assert rep.n_events == cloud1d.n


def test_integrate_lands_exactly_on_t_end(cloud1d):
    sch = build_scheme("upwind1", cloud1d, 1.0)
    u0 = np.exp(-cloud1d.points[:, 0] ** 2)
    res = integrate(sch, u0, t_end=1.0, cfl=0.3, tableau="rk3", record=True)
    assert res.t == 1.0
    assert res.diagnostics[-1].t == 1.0
    assert res.steps == len(res.diagnostics)
    # last step shortened, never lengthened
    assert res.diagnostics[-1].dt <= res.dt + 1e-15
    assert abs(sum(d.dt for d in res.diagnostics) - 1.0) < 1e-12


def test_integrate_n_steps_override(cloud1d):
    sch = build_scheme("upwind1", cloud1d, 1.0)
    u0 = np.exp(-cloud1d.points[:, 0] ** 2)
    res = integrate(sch, u0, t_end=0.0, cfl=0.4, n_steps=7)
    assert res.steps == 7
    assert res.t == pytest.approx(7 * res.dt)


def test_integrate_deterministic_bitwise(cloud1d):
    sch = build_scheme("muscl2", cloud1d, 1.0)
    u0 = np.exp(-cloud1d.points[:, 0] ** 2)
    r1 = integrate(sch, u0, t_end=0.5, cfl=0.2, mood=MoodConfig())
    r2 = integrate(sch, u0, t_end=0.5, cfl=0.2, mood=MoodConfig())
    assert np.array_equal(r1.u, r2.u)
    assert r1.mood_events == r2.mood_events


def test_nonfinite_state_reports_step_and_time(cloud1d):
    sch = build_scheme("upwind1", cloud1d, 1.0)
    rng = np.random.default_rng(43)
    u0 = rng.normal(size=cloud1d.n)
    dt = 100.0 * euler_timestep(cloud1d, 1.0)
    with pytest.raises(NonFiniteState) as exc:
        integrate(sch, u0, t_end=0.0, dt=dt, n_steps=200, tableau="euler")
    assert exc.value.step >= 1
    assert exc.value.t > 0.0


def test_pinned_values_held_exactly(cloud1d):
    pin = [0, 5]
    sch = build_scheme("muscl2", cloud1d, 1.0, pinned=pin)
    u0 = np.exp(-cloud1d.points[:, 0] ** 2)
    u0[0], u0[5] = 0.5, -0.25
    res = integrate(sch, u0, t_end=0.5, cfl=0.3, mood=MoodConfig())
    assert res.u[0] == 0.5
    assert res.u[5] == -0.25


def test_diagnostics_fields(cloud1d):
    sch = build_scheme("upwind1", cloud1d, 1.0)
    u0 = np.exp(-cloud1d.points[:, 0] ** 2)
    res = integrate(sch, u0, t_end=0.3, cfl=0.3, record=True)
    steps = [d.step for d in res.diagnostics]
    assert steps == list(range(1, res.steps + 1))
    ts = [d.t for d in res.diagnostics]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert all(d.mood_events == 0 for d in res.diagnostics)
    assert all(d.umin <= d.umax for d in res.diagnostics)
    # the mass column is the quadrature of u; transport only drifts it
    # slowly (these schemes are not exactly conservative)
    masses = [d.mass for d in res.diagnostics]
    assert abs(masses[-1] / masses[0] - 1) < 1e-2


def test_mood_events_sum_matches_diagnostics():
    cloud = make_cloud(1, 100, seed=44)
    sch = build_scheme("muscl2", cloud, 1.0)
    u0 = (np.abs(cloud.points[:, 0]) < 2.0).astype(float)   # square wave
    res = integrate(sch, u0, t_end=1.0, cfl=0.25, mood=MoodConfig(),
                    record=True)
    assert res.mood_events > 0
    assert res.mood_events == sum(d.mood_events for d in res.diagnostics)


def test_argument_validation(cloud1d):
    sch = build_scheme("upwind1", cloud1d, 1.0)
    u0 = np.zeros(cloud1d.n)
    with pytest.raises(ValueError):
        integrate(sch, u0[:-1], t_end=1.0)
    with pytest.raises(ValueError):
        integrate(sch, u0, t_end=-1.0)
    with pytest.raises(ValueError):
        integrate(sch, u0, t_end=1.0, dt=0.0)
    with pytest.raises(ValueError):
        resolve_tableau("rk9")
    with pytest.raises(ValueError):
        integrate(sch, u0, t_end=1e9, cfl=1e-9, max_steps=1000)
