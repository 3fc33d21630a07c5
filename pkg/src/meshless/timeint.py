"""Explicit Runge-Kutta integration with optional step screening.

The time step is always expressed as a multiple (the CFL number) of
the forward-Euler positivity bound of the dimension's first-order
scheme, so CFL numbers mean the same thing for every scheme on the
same cloud.

Screened stepping computes the full RK candidate first, screens it
once against the pre-step state, and recomputes rejected points with
a single forward-Euler application of the fallback scheme from the
pre-step state.  There is no second screening pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import mood as mood_mod
from .mood import MoodConfig, MoodReport
from .pointcloud import quad_weights
from .schemes import SpatialScheme, build_scheme, euler_timestep


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: tuple          # strictly lower triangular, row s has s entries
    b: tuple
    c: tuple
    order: int

    @property
    def stages(self) -> int:
        return len(self.b)

    def stability_coefficients(self) -> np.ndarray:
        """Coefficients of the linear stability polynomial
        R(z) = sum_k coeff[k] z^k, from R(z) = 1 + z b (I - zA)^-1 1."""
        s = self.stages
        A = np.zeros((s, s))
        for i, row in enumerate(self.a):
            A[i, :len(row)] = row
        b = np.asarray(self.b, dtype=float)
        coeff = np.empty(s + 1)
        coeff[0] = 1.0
        v = np.ones(s)
        for k in range(1, s + 1):
            coeff[k] = b @ v
            v = A @ v
        return coeff


TABLEAUS = {
    "euler": ButcherTableau("euler", ((),), (1.0,), (0.0,), 1),
    # Ralston's two-stage method
    "rk2": ButcherTableau("rk2", ((), (2 / 3,)), (0.25, 0.75), (0.0, 2 / 3), 2),
    # Shu-Osher strong-stability-preserving three-stage method
    "rk3": ButcherTableau("rk3", ((), (1.0,), (0.25, 0.25)),
                          (1 / 6, 1 / 6, 2 / 3), (0.0, 1.0, 0.5), 3),
    "rk4": ButcherTableau("rk4", ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
                          (1 / 6, 1 / 3, 1 / 3, 1 / 6), (0.0, 0.5, 0.5, 1.0), 4),
}


def resolve_tableau(tableau) -> ButcherTableau:
    if isinstance(tableau, ButcherTableau):
        return tableau
    try:
        return TABLEAUS[tableau]
    except KeyError:
        raise ValueError(f"unknown tableau {tableau!r}; "
                         f"expected one of {tuple(TABLEAUS)}") from None


class NonFiniteState(RuntimeError):
    """The state picked up a NaN or infinity during integration."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state after step {step} (t={t:g})")
        self.step = step
        self.t = t


def rk_step(rhs: Callable[[np.ndarray], np.ndarray], u: np.ndarray,
            dt: float, tableau: ButcherTableau,
            pinned=None, pin_values=None) -> np.ndarray:
    """One explicit RK step of du/dt = rhs(u).

    pinned/pin_values re-impose Dirichlet values on every stage state;
    scheme rows at pinned points are zero so this is only a guard
    against drift introduced by the caller's initial data.
    """
    ks = []
    for s in range(tableau.stages):
        row = tableau.a[s]
        if any(aij != 0.0 for aij in row):
            us = u.copy()
            for j, aij in enumerate(row):
                if aij != 0.0:
                    us += (dt * aij) * ks[j]
            if pinned is not None:
                us[pinned] = pin_values
        else:
            us = u
        ks.append(rhs(us))
    un = u.copy()
    for bs, k in zip(tableau.b, ks):
        if bs != 0.0:
            un += (dt * bs) * k
    if pinned is not None:
        un[pinned] = pin_values
    return un


def mood_step(scheme: SpatialScheme, fallback: SpatialScheme, u: np.ndarray,
              dt: float, tableau: ButcherTableau, cfg: MoodConfig,
              delta=None, detector=None, pinned=None, pin_values=None):
    """One screened RK step.  Returns (new state, MoodReport).

    detector overrides the acceptance test (same signature as
    mood.detect); used to fault-inject rejections in tests.
    """
    cand = rk_step(scheme.evaluate, u, dt, tableau, pinned, pin_values)
    curv = tuple(M @ u for M in scheme.curvature_matrices())
    det = mood_mod.detect if detector is None else detector
    report = det(scheme.cloud, u, cand, curv, cfg, delta=delta)
    if report.n_events:
        rejected = ~report.accepted
        safe = u + dt * fallback.evaluate(u)
        cand[rejected] = safe[rejected]
        if pinned is not None:
            cand[pinned] = pin_values
    return cand, report


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    t: float
    dt: float
    mass: float
    umin: float
    umax: float
    mood_events: int


@dataclass
class IntegrationResult:
    u: np.ndarray
    t: float
    steps: int
    dt: float                 # nominal step size (last step may be shorter)
    mood_events: int          # total rejections over the run
    diagnostics: Optional[list]


def integrate(scheme: SpatialScheme, u0: np.ndarray, t_end: float,
              cfl: float = 0.5, tableau="rk3",
              mood: Optional[MoodConfig] = None,
              fallback: Optional[SpatialScheme] = None,
              alpha=None, dt: Optional[float] = None,
              n_steps: Optional[int] = None,
              record: bool = False, detector=None,
              max_steps: int = 50_000_000) -> IntegrationResult:
    """Advance u0 to t_end.

    dt defaults to cfl * euler_timestep(cloud); the final step is
    shortened to land exactly on t_end.  n_steps overrides t_end and
    runs exactly that many full steps instead.  mood enables step
    screening; the fallback scheme is built on demand (first-order
    upwind in 1D, the positive scheme in 2D).  record keeps per-step
    diagnostics.  Raises NonFiniteState as soon as the state leaves
    the finite range.
    """
    tab = resolve_tableau(tableau)
    cloud = scheme.cloud
    u = np.array(u0, dtype=np.float64, copy=True)
    if u.shape != (cloud.n,):
        raise ValueError(f"state shape {u.shape} does not match cloud ({cloud.n},)")

    pinned_idx = np.flatnonzero(scheme.pinned)
    has_pins = pinned_idx.size > 0
    pins = pinned_idx if has_pins else None
    pin_values = u[pinned_idx].copy() if has_pins else None

    if dt is None:
        dt = cfl * euler_timestep(cloud, scheme.a, alpha=alpha,
                                  pinned=pinned_idx if has_pins else None)
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"time step must be positive, got {dt}")

    if n_steps is not None:
        total = int(n_steps)
        dt_last = dt
        t_end = total * dt
    else:
        if t_end <= 0.0:
            raise ValueError(f"t_end must be positive, got {t_end}")
        # land exactly on t_end: full steps of dt, then one short step
        total = int(np.ceil(t_end / dt - 1e-9))
        total = max(total, 1)
        dt_last = t_end - (total - 1) * dt
    if total > max_steps:
        raise ValueError(f"{total} steps exceed max_steps={max_steps}")

    if mood is not None and fallback is None:
        fallback = build_scheme(scheme.fallback_id, cloud, scheme.a,
                                alpha=alpha,
                                pinned=pinned_idx if has_pins else None)
    delta = mood_mod.point_delta(cloud) if mood is not None else None

    qw = quad_weights(cloud) if record else None
    diags = [] if record else None
    total_events = 0

    # blowup is an expected outcome reported via NonFiniteState, not a
    # floating-point warning
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, total + 1):
            h = dt if step < total else dt_last
            if mood is not None:
                u, report = mood_step(scheme, fallback, u, h, tab, mood,
                                      delta=delta, detector=detector,
                                      pinned=pins, pin_values=pin_values)
                events = report.n_events
            else:
                u = rk_step(scheme.evaluate, u, h, tab, pins, pin_values)
                events = 0
            total_events += events
            t = step * dt if step < total else t_end
            if not np.all(np.isfinite(u)):
                raise NonFiniteState(step, t)
            if record:
                diags.append(StepDiagnostics(step=step, t=t, dt=h,
                                             mass=float(qw @ u),
                                             umin=float(u.min()),
                                             umax=float(u.max()),
                                             mood_events=events))

    return IntegrationResult(u=u, t=t_end, steps=total, dt=dt,
                             mood_events=total_events, diagnostics=diags)
