"""Study drivers: convergence, positivity, long-run robustness,
Dirichlet boundaries, conservation, and efficiency.

Every driver returns plain records; file output lives in the CLI.
Scheme arguments are combo labels like "muscl2+mood": the optional
"+mood" suffix turns on step screening with the first-order fallback.
Grids are seeded by splitting a master seed, and every scheme inside
one study cell sees the same clouds, so schemes are compared on
identical geometry.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mood import MoodConfig
from .pointcloud import (Domain, GridGenConfig, PointCloud,
                         build_neighborhoods, generate_grid, quad_weights)
from .schemes import build_scheme
from .timeint import NonFiniteState, integrate, mood_step, resolve_tableau

DEFAULT_DOMAIN_1D = Domain(-5.0, 5.0, 1)
DEFAULT_DOMAIN_2D = Domain(-5.0, 5.0, 2)

# error above this (or any non-finite value) marks a run unstable
UNSTABLE_ERROR = 10.0


# ---------------------------------------------------------------------------
# initial conditions and exact solutions

def _gauss1d(p):
    return np.exp(-p[:, 0] ** 2)


def _step1d(p):
    return (p[:, 0] > 0).astype(np.float64)


def _gauss2d(p):
    return np.exp(-p[:, 0] ** 2 - p[:, 1] ** 2)


def _box2d(p):
    inx = (-0.5 < p[:, 0]) & (p[:, 0] < 0.5)
    iny = (-0.5 < p[:, 1]) & (p[:, 1] < 0.5)
    return (inx & iny).astype(np.float64)


def _dshock(p):
    return (p[:, 0] < -2.0).astype(np.float64)


INITIAL_CONDITIONS = {
    "gauss1d": (1, _gauss1d),
    "step1d": (1, _step1d),
    "gauss2d": (2, _gauss2d),
    "box2d": (2, _box2d),
    # jump at x=-2 for the Dirichlet study; ambient inflow value 0.5
    # is imposed by the boundary condition, not the profile
    "dshock": (1, _dshock),
}


def smooth_ic(dim: int) -> str:
    return "gauss1d" if dim == 1 else "gauss2d"


def shock_ic(dim: int) -> str:
    return "step1d" if dim == 1 else "box2d"


def ic_values(ic_id: str, points: np.ndarray) -> np.ndarray:
    dim, fn = INITIAL_CONDITIONS[ic_id]
    if points.shape[1] != dim:
        raise ValueError(f"{ic_id} is {dim}D, points are {points.shape[1]}D")
    return fn(points)


def exact_solution(ic_id: str, domain: Domain, points: np.ndarray, a,
                   t: float) -> np.ndarray:
    """Initial profile advected by a*t: evaluate at the characteristic
    foot x - a t, wrapped periodically.  The shift is reduced modulo
    the domain width first so a whole number of crossings is an exact
    identity."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    width = domain.hi - domain.lo
    pre = np.array(points, dtype=np.float64, copy=True)
    for ax in range(domain.dim):
        shift = math.fmod(a[ax] * t, width) if domain.periodic else a[ax] * t
        q = points[:, ax] - shift
        if domain.periodic:
            out = (q < domain.lo) | (q >= domain.hi)
            if np.any(out):
                q = q.copy()
                q[out] = domain.lo + np.mod(q[out] - domain.lo, width)
        pre[:, ax] = q
    return ic_values(ic_id, pre)


# ---------------------------------------------------------------------------
# functionals

def error_rel_l2(u_num, exact, cloud: Optional[PointCloud] = None) -> float:
    """2-norm of the error over all points, relative to the exact
    solution's norm; falls back to the absolute norm when the exact
    field is identically zero."""
    u_num = np.asarray(u_num, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    diff = np.linalg.norm(u_num - exact)
    ref = np.linalg.norm(exact)
    if ref == 0.0:
        return float(diff)
    return float(diff / ref)


def total_mass(u, cloud: PointCloud) -> float:
    """First-order quadrature: sum of cell size times value."""
    return float(quad_weights(cloud) @ np.asarray(u, dtype=np.float64))


def fit_slope(n_values, errors, n_fit: int = 3) -> float:
    """Least-squares convergence order from the finest n_fit grids:
    error ~ C N^-p returns p."""
    n_values = np.asarray(n_values, dtype=float)[-n_fit:]
    errors = np.asarray(errors, dtype=float)[-n_fit:]
    if np.any(~np.isfinite(errors)) or np.any(errors <= 0):
        return float("nan")
    coef = np.polyfit(np.log(n_values), np.log(errors), 1)
    return float(-coef[0])


# ---------------------------------------------------------------------------
# combo parsing

@dataclass(frozen=True)
class Combo:
    label: str
    scheme_id: str
    mood: bool
    tableau: str = "rk3"
    cfl: Optional[float] = None   # None = use the study's CFL


def parse_combo(label: str, tableau: str = "rk3", cfl=None) -> Combo:
    name = label.strip()
    use_mood = name.endswith("+mood")
    if use_mood:
        name = name[:-len("+mood")]
    return Combo(label=label.strip(), scheme_id=name, mood=use_mood,
                 tableau=tableau, cfl=cfl)


@dataclass
class ExperimentRecord:
    scheme: str          # combo label
    n: int               # total point count
    r: float
    seed: int
    cfl: float
    t_end: float
    error_rel_l2: float
    wall_time: float      # integration loop only
    setup_time: float     # scheme construction
    mass_ratio: float     # final/initial
    mood_events: int
    status: str           # "ok" | "unstable"


def _master_children(master_seed: int, count: int):
    return np.random.SeedSequence(master_seed).spawn(count)


def _make_cloud(domain, n, r_factor, seed) -> PointCloud:
    dx = (domain.hi - domain.lo) / n if domain.periodic \
        else (domain.hi - domain.lo) / (n - 1)
    return build_neighborhoods(generate_grid(
        domain, GridGenConfig(int(n), r_factor * dx, seed)))


def _run_one(combo: Combo, cloud: PointCloud, a, ic_id: str, t_end: float,
             cfl: float, seed_id: int, r: float) -> ExperimentRecord:
    """Integrate one combo on one cloud and grade the outcome."""
    t0 = time.perf_counter()
    scheme = build_scheme(combo.scheme_id, cloud, a)
    setup = time.perf_counter() - t0
    u0 = ic_values(ic_id, cloud.points)
    m0 = total_mass(u0, cloud)
    use_cfl = combo.cfl if combo.cfl is not None else cfl
    mood_cfg = MoodConfig() if combo.mood else None
    t0 = time.perf_counter()
    try:
        res = integrate(scheme, u0, t_end, cfl=use_cfl, tableau=combo.tableau,
                        mood=mood_cfg)
        wall = time.perf_counter() - t0
        exact = exact_solution(ic_id, cloud.domain, cloud.points, a, t_end)
        err = error_rel_l2(res.u, exact, cloud)
        mass_ratio = total_mass(res.u, cloud) / m0 if m0 != 0 else float("nan")
        events = res.mood_events
        status = "ok" if (np.isfinite(err) and err <= UNSTABLE_ERROR) else "unstable"
    except NonFiniteState:
        wall = time.perf_counter() - t0
        err, mass_ratio, events, status = float("inf"), float("nan"), 0, "unstable"
    return ExperimentRecord(scheme=combo.label, n=cloud.n, r=r,
                            seed=seed_id, cfl=use_cfl, t_end=t_end,
                            error_rel_l2=err, wall_time=wall,
                            setup_time=setup, mass_ratio=mass_ratio,
                            mood_events=events, status=status)


# ---------------------------------------------------------------------------
# studies

@dataclass
class ConvergenceStudy:
    records: list
    slopes: dict          # combo label -> fitted order (nan on failures)
    n_values: list


def run_convergence(dim: int, schemes, ic_id: Optional[str] = None,
                    n_values=None, cfl: Optional[float] = None,
                    t_end: Optional[float] = None, master_seed: int = 0,
                    r_factor: float = 0.5, a=None,
                    tableau: str = "rk3") -> ConvergenceStudy:
    """Error vs grid size at fixed CFL; defaults follow the study
    protocol for the dimension (1D: t=2.5 at CFL 1/20; 2D: t=1.0 at
    CFL 1/40).  One cloud per grid size, shared by all schemes."""
    domain = DEFAULT_DOMAIN_1D if dim == 1 else DEFAULT_DOMAIN_2D
    if a is None:
        a = 1.0 if dim == 1 else (1.0, 1.0)
    if ic_id is None:
        ic_id = smooth_ic(dim)
    if n_values is None:
        n_values = [100, 200, 400, 800, 1600] if dim == 1 else [30, 50, 70, 100]
    if cfl is None:
        cfl = 1 / 20 if dim == 1 else 1 / 40
    if t_end is None:
        t_end = 2.5 if dim == 1 else 1.0
    combos = [parse_combo(s, tableau=tableau) for s in schemes]
    children = _master_children(master_seed, len(n_values))
    records = []
    for ni, n in enumerate(n_values):
        cloud = _make_cloud(domain, n, r_factor, children[ni])
        for combo in combos:
            records.append(_run_one(combo, cloud, a, ic_id, t_end, cfl,
                                    seed_id=ni, r=r_factor * cloud.dx))
    slopes = {}
    for combo in combos:
        errs = [rec.error_rel_l2 for rec in records if rec.scheme == combo.label
                and rec.status == "ok"]
        ns = [rec.n if dim == 1 else int(round(math.sqrt(rec.n)))
              for rec in records if rec.scheme == combo.label
              and rec.status == "ok"]
        slopes[combo.label] = fit_slope(ns, errs) if len(errs) >= 3 else float("nan")
    return ConvergenceStudy(records=records, slopes=slopes,
                            n_values=list(n_values))


@dataclass
class PositivityResult:
    scheme_id: str
    n_grids: int
    n_steps: int
    worst_violation: float   # max over grids/steps of DMP breach


def run_positivity(dim: int, n: Optional[int] = None, n_grids: int = 10,
                   n_steps: int = 1000, master_seed: int = 0,
                   r_factor: float = 0.5, a=None, tol: float = 1e-12) -> PositivityResult:
    """Forward-Euler steps of the first-order positive scheme at its
    positivity bound must satisfy the local discrete maximum principle
    at every point and step.  Random initial data is the strongest
    probe: any non-convex weight combination shows up immediately."""
    from .kernels._ref import _group_minmax

    domain = DEFAULT_DOMAIN_1D if dim == 1 else DEFAULT_DOMAIN_2D
    if a is None:
        a = 1.0 if dim == 1 else (1.0, 1.0)
    if n is None:
        n = 100 if dim == 1 else 30
    sid = "upwind1" if dim == 1 else "positive2d"
    children = _master_children(master_seed, n_grids)
    worst = 0.0
    for g in range(n_grids):
        cloud = _make_cloud(domain, n, r_factor, children[g])
        scheme = build_scheme(sid, cloud, a)
        dt = scheme.max_timestep()
        rng = np.random.default_rng(children[g].spawn(1)[0])
        u = rng.random(cloud.n)
        center = np.arange(cloud.n)
        L = scheme.operator
        for _ in range(n_steps):
            mn, mx = _group_minmax(cloud.indptr, cloud.indices, center, u)
            u_new = u + dt * (L @ u)
            breach = np.maximum(mn - u_new, u_new - mx)
            worst = max(worst, float(breach.max()))
            u = u_new
    return PositivityResult(scheme_id=sid, n_grids=n_grids, n_steps=n_steps,
                            worst_violation=worst)


@dataclass
class LongRunRow:
    scheme: str
    n_grids: int
    n_stable: int

    @property
    def stable_fraction(self) -> float:
        return self.n_stable / self.n_grids


def run_longrun_2d(schemes=("muscl1", "muscl2", "positive2d", "upwind2", "weno2"),
                   n: int = 30, n_grids: int = 50, t_end: float = 30 * math.sqrt(2),
                   cfl: float = 0.1, master_seed: int = 0, r_factor: float = 0.5,
                   a=(1.0, 1.0), tableau: str = "rk3") -> list:
    """Shock advected for many domain crossings; a run counts as stable
    when the state stays finite to the end.  Cross-checks the eigenvalue
    classification and covers the nonlinear scheme, which has no
    operator matrix to classify."""
    children = _master_children(master_seed, n_grids)
    combos = [parse_combo(s, tableau=tableau) for s in schemes]
    stable = {c.label: 0 for c in combos}
    for g in range(n_grids):
        cloud = _make_cloud(DEFAULT_DOMAIN_2D, n, r_factor, children[g])
        u0 = ic_values("box2d", cloud.points)
        for combo in combos:
            scheme = build_scheme(combo.scheme_id, cloud, a)
            mood_cfg = MoodConfig() if combo.mood else None
            try:
                res = integrate(scheme, u0, t_end, cfl=cfl,
                                tableau=combo.tableau, mood=mood_cfg)
                if np.all(np.isfinite(res.u)):
                    stable[combo.label] += 1
            except NonFiniteState:
                pass
    return [LongRunRow(scheme=c.label, n_grids=n_grids, n_stable=stable[c.label])
            for c in combos]


@dataclass
class DirichletResult:
    scheme: str
    u: np.ndarray
    x: np.ndarray
    overshoot: float       # max(u) - 1
    umin: float
    boundary_value: float
    finite: bool
    mood_events: int


def run_dirichlet(n: int = 100, cfl: float = 1 / 3, t_end: float = 5.0,
                  schemes=("upwind1", "upwind2", "weno2", "muscl2+mood",
                           "muscl4+mood"),
                  master_seed: int = 0, r_factor: float = 0.5,
                  a: float = 1.0, boundary_value: float = 0.5,
                  tableau: str = "rk3") -> list:
    """Non-periodic domain with inflow value pinned at the left end and
    a jump initially at x=-2.  Near the boundary the central stencils
    turn one-sided; directional sub-stencils with too few points drop
    out.  Reports the final profile and its overshoot above the jump
    level."""
    domain = Domain(-5.0, 5.0, 1, periodic=False)
    cloud = _make_cloud(domain, n, r_factor,
                        _master_children(master_seed, 1)[0])
    pin = [int(np.argmin(cloud.points[:, 0]))]
    combos = [parse_combo(s, tableau=tableau) for s in schemes]
    out = []
    for combo in combos:
        scheme = build_scheme(combo.scheme_id, cloud, a, pinned=pin)
        u0 = ic_values("dshock", cloud.points)
        u0[pin[0]] = boundary_value
        mood_cfg = MoodConfig() if combo.mood else None
        try:
            res = integrate(scheme, u0, t_end, cfl=cfl, tableau=combo.tableau,
                            mood=mood_cfg)
            u, events, finite = res.u, res.mood_events, bool(np.all(np.isfinite(res.u)))
        except NonFiniteState:
            u, events, finite = np.full(cloud.n, np.nan), 0, False
        out.append(DirichletResult(
            scheme=combo.label, u=u, x=cloud.points[:, 0],
            overshoot=float(np.nanmax(u) - 1.0), umin=float(np.nanmin(u)),
            boundary_value=float(u[pin[0]]), finite=finite,
            mood_events=events))
    return out


@dataclass
class MassSeries:
    scheme: str
    t: np.ndarray
    ratio: np.ndarray      # m(t)/m(0)

    @property
    def final_ratio(self) -> float:
        return float(self.ratio[-1])

    @property
    def max_drift(self) -> float:
        return float(np.max(np.abs(self.ratio - 1.0)))


def run_conservation(n: int = 100,
                     schemes=("upwind1", "muscl2", "muscl2+mood",
                              "muscl4+mood", "weno2"),
                     cfl: float = 0.25, t_end: float = 200.0,
                     master_seed: int = 0, r_factor: float = 0.5,
                     a: float = 1.0, tableau: str = "rk3") -> list:
    """Mass m(t)/m(0) per step for a Gaussian advected on one fixed
    random grid.  None of these schemes is conservative by
    construction; this measures how far each drifts."""
    cloud = _make_cloud(DEFAULT_DOMAIN_1D, n, r_factor,
                        _master_children(master_seed, 1)[0])
    u0 = ic_values("gauss1d", cloud.points)
    m0 = total_mass(u0, cloud)
    out = []
    for label in schemes:
        combo = parse_combo(label, tableau=tableau)
        scheme = build_scheme(combo.scheme_id, cloud, a)
        mood_cfg = MoodConfig() if combo.mood else None
        res = integrate(scheme, u0, t_end, cfl=cfl, tableau=combo.tableau,
                        mood=mood_cfg, record=True)
        t = np.array([d.t for d in res.diagnostics])
        mass = np.array([d.mass for d in res.diagnostics])
        out.append(MassSeries(scheme=combo.label, t=t, ratio=mass / m0))
    return out


# efficiency combinations: integrator order matched to the scheme, the
# largest stable CFL for each pairing, screening everywhere but for
# the nonlinear scheme
EFFICIENCY_COMBOS_1D = (
    Combo("upwind1", "upwind1", False, "euler", 0.99),
    Combo("upwind2+mood", "upwind2", True, "rk2", 0.3),
    Combo("weno2", "weno2", False, "rk2", 0.7),
    Combo("muscl2+mood", "muscl2", True, "rk2", 0.75),
    Combo("muscl4+mood", "muscl4", True, "rk4", 0.7),
    Combo("muscl2", "muscl2", False, "rk2", 0.75),
    Combo("muscl4", "muscl4", False, "rk4", 0.7),
)

EFFICIENCY_COMBOS_2D = (
    Combo("positive2d", "positive2d", False, "euler", 0.5),
    Combo("upwind2+mood", "upwind2", True, "rk3", 0.5),
    Combo("muscl1+mood", "muscl1", True, "rk3", 0.5),
    Combo("muscl2", "muscl2", False, "rk3", 0.5),
    Combo("muscl2+mood", "muscl2", True, "rk3", 0.5),
    Combo("weno2", "weno2", False, "rk3", 0.5),
)

EFFICIENCY_N_1D = (30, 46, 72, 111, 171, 264, 407, 629, 971, 1500)
EFFICIENCY_N_2D = (30, 50, 70, 100, 175, 250)


def run_efficiency(dim: int, combos=None, n_values=None,
                   t_end: Optional[float] = None,
                   ic_id: Optional[str] = None, n_grids: int = 10,
                   master_seed: int = 0, r_factor: float = 0.5,
                   a=None) -> list:
    """Wall time vs error per combo and grid size, averaged over random
    grids; unstable runs are excluded from the averages but counted.
    Integration is timed alone; setup (MLS fits) is recorded separately.
    """
    domain = DEFAULT_DOMAIN_1D if dim == 1 else DEFAULT_DOMAIN_2D
    if combos is None:
        combos = EFFICIENCY_COMBOS_1D if dim == 1 else EFFICIENCY_COMBOS_2D
    if n_values is None:
        n_values = EFFICIENCY_N_1D if dim == 1 else EFFICIENCY_N_2D
    if t_end is None:
        t_end = 7.5 if dim == 1 else 1.0
    if ic_id is None:
        ic_id = smooth_ic(dim)
    if a is None:
        a = 1.0 if dim == 1 else (1.0, 1.0)
    children = _master_children(master_seed, len(n_values) * n_grids)
    records = []
    for ni, n in enumerate(n_values):
        for g in range(n_grids):
            cloud = _make_cloud(domain, n, r_factor,
                                children[ni * n_grids + g])
            for combo in combos:
                rec = _run_one(combo, cloud, a, ic_id, t_end,
                               cfl=combo.cfl, seed_id=g,
                               r=r_factor * cloud.dx)
                records.append(rec)
    return records


@dataclass
class EfficiencySummary:
    scheme: str
    n: int
    mean_error: float
    mean_wall_time: float
    mean_setup_time: float
    n_ok: int
    n_unstable: int


def summarize_efficiency(records) -> list:
    keys = []
    for rec in records:
        k = (rec.scheme, rec.n)
        if k not in keys:
            keys.append(k)
    out = []
    for scheme, n in keys:
        sel = [r for r in records if r.scheme == scheme and r.n == n]
        ok = [r for r in sel if r.status == "ok"]
        out.append(EfficiencySummary(
            scheme=scheme, n=n,
            mean_error=float(np.mean([r.error_rel_l2 for r in ok])) if ok else float("nan"),
            mean_wall_time=float(np.mean([r.wall_time for r in ok])) if ok else float("nan"),
            mean_setup_time=float(np.mean([r.setup_time for r in ok])) if ok else float("nan"),
            n_ok=len(ok), n_unstable=len(sel) - len(ok)))
    return out


@dataclass
class MoodEventTrace:
    cloud: PointCloud
    steps: list            # list of (step index, rejected point indices)
    dt: float


def run_mood_events(n: int = 100, n_record: int = 10, cfl: float = 1 / 20,
                    scheme_id: str = "muscl2", master_seed: int = 0,
                    r_factor: float = 0.5, a: float = 1.0,
                    tableau: str = "rk3") -> MoodEventTrace:
    """Step a shock and record which points get rejected per step, for
    locating screening events relative to the discontinuity."""
    from .mood import point_delta
    from .schemes import euler_timestep

    cloud = _make_cloud(DEFAULT_DOMAIN_1D, n, r_factor,
                        _master_children(master_seed, 1)[0])
    scheme = build_scheme(scheme_id, cloud, a)
    fallback = build_scheme(scheme.fallback_id, cloud, a)
    tab = resolve_tableau(tableau)
    dt = cfl * euler_timestep(cloud, a)
    delta = point_delta(cloud)
    u = ic_values("step1d", cloud.points)
    steps = []
    for s in range(1, n_record + 1):
        u, report = mood_step(scheme, fallback, u, dt, tab, MoodConfig(),
                              delta=delta)
        steps.append((s, np.flatnonzero(~report.accepted)))
    return MoodEventTrace(cloud=cloud, steps=steps, dt=dt)
