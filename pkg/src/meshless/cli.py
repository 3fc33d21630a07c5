"""Command line front end for the study drivers.

One subcommand per study::

    meshless run          single simulation, solution + per-step diagnostics
    meshless convergence  error vs grid size at fixed CFL
    meshless spectrum     operator eigenvalues + RK stability boundaries
    meshless sensitivity  fraction of random grids with an unstable operator
    meshless dirichlet    non-periodic shock with a pinned inflow value
    meshless conservation total mass over a long integration
    meshless efficiency   error vs wall time over scheme/integrator combos

Every subcommand writes CSV files, a gnuplot script per figure, and a
manifest.txt with the resolved parameters into --out.  Parameters come
from (highest priority first) command line flags, the MESHLESS_SEED
environment variable (seed only), an INI config file given with
--config, and built-in defaults matching the study protocols.  Reruns
with the same parameters produce byte-identical files except for the
timing columns (wall_time, setup_time).

Config files use one section per module::

    [experiment]
    dim = 1
    seed = 7
    [scheme]
    schemes = upwind1, muscl2+mood
    [integrator]
    cfl = 0.05

Unknown sections or keys are rejected.
"""

import argparse
import configparser
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import experiments as xp
from . import stability as st
from .mood import MODES, MoodConfig
from .pointcloud import Domain
from .schemes import SCHEME_IDS, build_scheme
from .timeint import TABLEAUS, NonFiniteState, integrate

# eigenvalue studies are dense; refuse clouds past desk scale
MAX_EIG_POINTS = 5000

_RK_ORDER = {"euler": 1, "rk2": 2, "rk3": 3, "rk4": 4}


class ConfigError(Exception):
    """Bad config file or flag value; maps to exit code 2."""


# ---------------------------------------------------------------------------
# run specification


@dataclass
class RunSpec:
    """Fully resolved parameters of one invocation."""

    subcommand: str
    out: str = "out"
    seed: int = 0
    jobs: int = 1
    dim: int = 1
    ic: str = ""
    schemes: tuple = ()
    n: int = 0
    n_values: tuple = ()
    r: float = 0.5          # jitter amplitude in units of dx
    r_values: tuple = ()
    cfl: float = 0.0
    t_end: float = 0.0
    tableau: str = "rk3"
    n_steps: int = 0        # 0 = run to t_end
    mood_mode: str = "relaxed_u2"
    alpha: float = 0.0      # 0 = per-dimension default weight exponent
    weno_eps: float = 0.0   # 0 = per-dimension default regularization
    n_grids: int = 0


def _parse_int_list(s):
    return tuple(int(v) for v in s.replace(",", " ").split())


def _parse_float_list(s):
    return tuple(float(v) for v in s.replace(",", " ").split())


def _parse_str_list(s):
    return tuple(v.strip() for v in s.split(",") if v.strip())


# section -> key -> (RunSpec field, parser)
CONFIG_SCHEMA = {
    "experiment": {
        "dim": ("dim", int),
        "ic": ("ic", str),
        "seed": ("seed", int),
        "jobs": ("jobs", int),
        "out": ("out", str),
        "n_grids": ("n_grids", int),
    },
    "grid": {
        "n": ("n", int),
        "n_values": ("n_values", _parse_int_list),
        "r": ("r", float),
        "r_values": ("r_values", _parse_float_list),
    },
    "scheme": {
        "schemes": ("schemes", _parse_str_list),
        "alpha": ("alpha", float),
        "weno_eps": ("weno_eps", float),
    },
    "integrator": {
        "cfl": ("cfl", float),
        "t_end": ("t_end", float),
        "tableau": ("tableau", str),
        "n_steps": ("n_steps", int),
    },
    "mood": {
        "mode": ("mood_mode", str),
    },
}


def _load_config(path):
    cp = configparser.ConfigParser(interpolation=None)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    out = {}
    for sec in cp.sections():
        if sec not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{sec}] in {path}")
        for key, raw in cp.items(sec):
            if key not in CONFIG_SCHEMA[sec]:
                raise ConfigError(f"unknown config key '{key}' in [{sec}] "
                                  f"of {path}")
            field, parse = CONFIG_SCHEMA[sec][key]
            try:
                out[field] = parse(raw)
            except ValueError:
                raise ConfigError(f"bad value for [{sec}] {key}: {raw!r}")
    return out


# defaults mirroring the study drivers, so the manifest records the
# protocol actually run
_CONV_DEFAULTS = {
    1: {"n_values": (100, 200, 400, 800, 1600), "cfl": 1 / 20, "t_end": 2.5,
        "schemes": ("upwind1", "upwind2", "weno2", "muscl2+mood",
                    "muscl4+mood")},
    2: {"n_values": (30, 50, 70, 100), "cfl": 1 / 40, "t_end": 1.0,
        "schemes": ("muscl1", "muscl2", "weno2", "positive2d")},
}

_SENS_DEFAULTS = {
    "schemes": ("upwind1", "upwind2", "muscl1", "muscl2", "muscl3", "muscl4"),
    "n_values": (100, 200, 400),
    "r_values": (0.5,),
    "n_grids": 100,
}

_SPECTRUM_SCHEMES = ("upwind1", "muscl1", "muscl2", "muscl3", "muscl4")

_DIRICHLET_SCHEMES = ("upwind1", "upwind2", "weno2", "muscl2+mood",
                      "muscl4+mood")
_CONSERVATION_SCHEMES = ("upwind1", "muscl2", "muscl2+mood", "muscl4+mood",
                         "weno2")


def _apply_subcommand_defaults(spec: RunSpec, given):
    """Fill unset fields with the study protocol for spec.subcommand.

    given is the set of field names fixed by flag or config; everything
    else falls back here so the manifest shows the resolved protocol.
    """
    def default(field, value):
        if field not in given:
            setattr(spec, field, value)

    sub, dim = spec.subcommand, spec.dim
    if sub == "run":
        default("n", 100 if dim == 1 else 30)
        default("cfl", 0.5)
        default("t_end", 1.0)
        default("schemes", ("muscl2",))
    elif sub == "convergence":
        for field, value in _CONV_DEFAULTS[dim].items():
            default(field, value)
    elif sub == "spectrum":
        default("n", 100 if dim == 1 else 30)
        default("schemes", _SPECTRUM_SCHEMES)
    elif sub == "sensitivity":
        for field, value in _SENS_DEFAULTS.items():
            default(field, value)
    elif sub == "dirichlet":
        default("n", 100)
        default("cfl", 1 / 3)
        default("t_end", 5.0)
        default("schemes", _DIRICHLET_SCHEMES)
    elif sub == "conservation":
        default("n", 100)
        default("cfl", 0.25)
        default("t_end", 200.0)
        default("schemes", _CONSERVATION_SCHEMES)
    elif sub == "efficiency":
        default("n_values",
                xp.EFFICIENCY_N_1D if dim == 1 else xp.EFFICIENCY_N_2D)
        default("t_end", 7.5 if dim == 1 else 1.0)
        default("n_grids", 10)
        default("schemes", ())   # empty = built-in combo table
    if spec.subcommand in ("run", "convergence", "efficiency") and not spec.ic:
        spec.ic = xp.smooth_ic(dim)


def _validate(spec: RunSpec):
    if spec.dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {spec.dim}")
    if spec.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if spec.seed < 0:
        raise ConfigError("seed must be >= 0")
    if not 0.0 <= spec.r <= 0.5:
        raise ConfigError(f"r must lie in [0, 0.5] (units of dx), got {spec.r}")
    for rv in spec.r_values:
        if not 0.0 <= rv <= 0.5:
            raise ConfigError(f"r_values entries must lie in [0, 0.5], got {rv}")
    if spec.subcommand in ("run", "convergence", "dirichlet", "conservation") \
            and not spec.cfl > 0 and not spec.n_steps:
        raise ConfigError("cfl must be positive")
    if spec.subcommand in ("run", "spectrum", "dirichlet", "conservation") \
            and spec.n < 3:
        raise ConfigError(f"n must be at least 3, got {spec.n}")
    if spec.subcommand in ("convergence", "efficiency") and not spec.n_values:
        raise ConfigError("n_values must not be empty")
    if spec.subcommand == "sensitivity" and not (spec.n_values
                                                 and spec.r_values):
        raise ConfigError("n_values and r_values must not be empty")
    if spec.tableau not in TABLEAUS:
        raise ConfigError(f"unknown tableau {spec.tableau!r}; "
                          f"expected one of {tuple(TABLEAUS)}")
    if spec.mood_mode not in MODES:
        raise ConfigError(f"unknown mood mode {spec.mood_mode!r}; "
                          f"expected one of {MODES}")
    for label in spec.schemes:
        sid = xp.parse_combo(label).scheme_id
        if sid not in SCHEME_IDS:
            raise ConfigError(f"unknown scheme {label!r}; base ids: "
                              f"{SCHEME_IDS} (append +mood to limit)")
        if spec.dim == 1 and sid == "positive2d":
            raise ConfigError("positive2d is a two-dimensional scheme")
    if spec.ic:
        if spec.ic not in xp.INITIAL_CONDITIONS:
            raise ConfigError(f"unknown initial condition {spec.ic!r}; "
                              f"expected one of {tuple(xp.INITIAL_CONDITIONS)}")
        ic_dim = xp.INITIAL_CONDITIONS[spec.ic][0]
        if ic_dim != spec.dim:
            raise ConfigError(f"initial condition {spec.ic!r} is "
                              f"{ic_dim}-dimensional but dim={spec.dim}")
    if spec.subcommand == "run" and spec.ic == "dshock":
        raise ConfigError("dshock needs the non-periodic boundary driver; "
                          "use the dirichlet subcommand")


def parse_args(argv) -> RunSpec:
    """Parse argv into a validated RunSpec.

    Precedence: flags > MESHLESS_SEED (seed only) > config file >
    study-protocol defaults.
    """
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        parser.error("a subcommand is required")

    spec = RunSpec(subcommand=ns.subcommand)
    given = set()

    if ns.config:
        for field, value in _load_config(ns.config).items():
            setattr(spec, field, value)
            given.add(field)

    env_seed = os.environ.get("MESHLESS_SEED")
    if env_seed is not None:
        try:
            spec.seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"MESHLESS_SEED must be an integer, "
                              f"got {env_seed!r}")
        given.add("seed")

    for field in (f.name for f in fields(RunSpec)):
        value = getattr(ns, field, None)
        if value is not None:
            setattr(spec, field, value)
            given.add(field)

    _apply_subcommand_defaults(spec, given)
    _validate(spec)
    return spec


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="meshless",
        description="Meshless advection schemes: studies and single runs.")
    parser.add_argument("--version", action="version",
                        version=f"meshless {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="INI config file (sections per module)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default: out)")
    common.add_argument("--seed", type=int,
                        help="master seed (default 0; MESHLESS_SEED overrides)")
    common.add_argument("--jobs", type=int,
                        help="worker processes (default 1, deterministic timing)")

    def add_scheme_args(p, many=True):
        if many:
            p.add_argument("--schemes", type=_parse_str_list, metavar="LIST",
                           help="comma-separated scheme ids; +mood suffix "
                                "enables the a-posteriori limiter")
        else:
            p.add_argument("--scheme", dest="schemes",
                           type=lambda s: (s.strip(),), metavar="ID",
                           help="scheme id, e.g. muscl2 or muscl2+mood")
        p.add_argument("--alpha", type=float,
                       help="weight exponent (default 1/dx^2 in 1D, "
                            "6/h_max^2 in 2D)")
        p.add_argument("--weno-eps", type=float,
                       help="weno regularization (default 1e-6 in 1D, "
                            "1e-12 in 2D)")

    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("run", parents=[common],
                       help="single simulation with per-step diagnostics")
    p.add_argument("--dim", type=int, choices=(1, 2), help="dimension (default 1)")
    add_scheme_args(p, many=False)
    p.add_argument("--ic", help="initial condition id (default: Gaussian)")
    p.add_argument("--n", type=int, help="points per axis (default 100/30)")
    p.add_argument("--r", type=float,
                   help="jitter amplitude in units of dx (default 0.5)")
    p.add_argument("--cfl", type=float, help="CFL number (default 0.5)")
    p.add_argument("--t-end", type=float, help="final time (default 1.0)")
    p.add_argument("--n-steps", type=int,
                   help="fixed step count overriding t-end")
    p.add_argument("--tableau", choices=tuple(TABLEAUS),
                   help="RK tableau (default rk3)")
    p.add_argument("--mood-mode", choices=MODES,
                   help="detection cascade when the scheme has +mood "
                        "(default relaxed_u2)")

    p = sub.add_parser("convergence", parents=[common],
                       help="error vs grid size at fixed CFL")
    p.add_argument("--dim", type=int, choices=(1, 2), help="dimension (default 1)")
    add_scheme_args(p)
    p.add_argument("--ic", help="initial condition id (default: Gaussian)")
    p.add_argument("--n-values", type=_parse_int_list, metavar="LIST",
                   help="points per axis (default 100..1600 / 30..100)")
    p.add_argument("--r", type=float, help="jitter in units of dx (default 0.5)")
    p.add_argument("--cfl", type=float, help="CFL (default 1/20 1D, 1/40 2D)")
    p.add_argument("--t-end", type=float, help="final time (default 2.5 / 1.0)")
    p.add_argument("--tableau", choices=tuple(TABLEAUS),
                   help="RK tableau (default rk3)")
    p.add_argument("--mood-mode", choices=MODES, help="detection cascade")

    p = sub.add_parser("spectrum", parents=[common],
                       help="operator eigenvalues and RK stability boundaries")
    p.add_argument("--dim", type=int, choices=(1, 2), help="dimension (default 1)")
    add_scheme_args(p)
    p.add_argument("--n", type=int, help="points per axis (default 100/30)")
    p.add_argument("--r", type=float, help="jitter in units of dx (default 0.5)")

    p = sub.add_parser("sensitivity", parents=[common],
                       help="percentage of random grids with unstable spectra")
    p.add_argument("--dim", type=int, choices=(1, 2), help="dimension (default 1)")
    add_scheme_args(p)
    p.add_argument("--n-values", type=_parse_int_list, metavar="LIST",
                   help="points per axis (default 100,200,400)")
    p.add_argument("--r-values", type=_parse_float_list, metavar="LIST",
                   help="jitter amplitudes in units of dx (default 0.5)")
    p.add_argument("--n-grids", type=int, help="grids per cell (default 100)")

    p = sub.add_parser("dirichlet", parents=[common],
                       help="non-periodic shock with pinned inflow value")
    add_scheme_args(p)
    p.add_argument("--n", type=int, help="points (default 100)")
    p.add_argument("--r", type=float, help="jitter in units of dx (default 0.5)")
    p.add_argument("--cfl", type=float, help="CFL (default 1/3)")
    p.add_argument("--t-end", type=float, help="final time (default 5.0)")
    p.add_argument("--tableau", choices=tuple(TABLEAUS),
                   help="RK tableau (default rk3)")

    p = sub.add_parser("conservation", parents=[common],
                       help="total mass over a long integration")
    add_scheme_args(p)
    p.add_argument("--n", type=int, help="points (default 100)")
    p.add_argument("--r", type=float, help="jitter in units of dx (default 0.5)")
    p.add_argument("--cfl", type=float, help="CFL (default 1/4)")
    p.add_argument("--t-end", type=float, help="final time (default 200)")
    p.add_argument("--tableau", choices=tuple(TABLEAUS),
                   help="RK tableau (default rk3)")

    p = sub.add_parser("efficiency", parents=[common],
                       help="error vs wall time over scheme/integrator combos")
    p.add_argument("--dim", type=int, choices=(1, 2), help="dimension (default 1)")
    add_scheme_args(p)
    p.add_argument("--ic", help="initial condition id (default: Gaussian)")
    p.add_argument("--n-values", type=_parse_int_list, metavar="LIST",
                   help="points per axis (default: built-in ladder)")
    p.add_argument("--n-grids", type=int, help="grids per size (default 10)")
    p.add_argument("--r", type=float, help="jitter in units of dx (default 0.5)")
    p.add_argument("--t-end", type=float, help="final time (default 7.5 / 1.0)")
    p.add_argument("--cfl", type=float,
                   help="CFL for --schemes overrides (default 0.5); the "
                        "built-in combos carry their own")
    p.add_argument("--tableau", choices=tuple(TABLEAUS),
                   help="tableau for --schemes overrides (default rk3)")

    return parser


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v):
    """CSV cell formatting; 17 significant digits round-trips floats."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


RECORD_HEADER = ("scheme", "n", "r", "seed", "cfl", "t_end", "error_rel_l2",
                 "wall_time", "setup_time", "mass_ratio", "mood_events",
                 "status")


def _record_row(rec: xp.ExperimentRecord):
    return (rec.scheme, rec.n, rec.r, rec.seed, rec.cfl, rec.t_end,
            rec.error_rel_l2, rec.wall_time, rec.setup_time, rec.mass_ratio,
            rec.mood_events, rec.status)


def _write_manifest(spec: RunSpec, outdir):
    lines = [f"meshless {__version__}",
             f"subcommand: {spec.subcommand}",
             f"master_seed: {spec.seed}",
             "parameters:"]
    for f in fields(spec):
        if f.name in ("subcommand", "seed"):
            continue
        v = getattr(spec, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, float):
            v = format(v, ".17g")
        lines.append(f"  {f.name} = {v}")
    with open(os.path.join(outdir, "manifest.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


def _plot_header(title, xlabel, ylabel, logxy=False):
    lines = ['set datafile separator ","',
             f'set title "{title}"',
             f'set xlabel "{xlabel}"',
             f'set ylabel "{ylabel}"',
             "set key outside"]
    if logxy:
        lines.append("set logscale xy")
    return lines


def _write_plot(path, lines):
    # no series (empty scheme list): drop the dangling plot command so the
    # script stays loadable alongside the header-only CSV
    if lines and lines[-1] == "":
        lines = lines[:-2] if lines[-2:-1] == ["plot \\"] else lines[:-1]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _series_clauses(csvfile, labels, label_col, xexpr, yexpr, style):
    # one clause per label, filtering the long-format CSV by its first column
    clauses = []
    for lab in labels:
        cond = f'strcol({label_col}) eq "{lab}"'
        clauses.append(f'  "{csvfile}" using ({cond} ? {xexpr} : NaN):{yexpr} '
                       f'with {style} title "{lab}"')
    return clauses


# ---------------------------------------------------------------------------
# parallel helpers (independent scheme/combo cells; identical results to
# the serial path because clouds are seeded per grid cell, not per scheme)


def _chunks(items, jobs):
    out = [list(items[i::jobs]) for i in range(jobs)]
    return [c for c in out if c]


def _pmap(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


def _convergence_task(arg):
    kw, labels = arg
    study = xp.run_convergence(schemes=labels, **kw)
    return study.records, study.slopes


def _sensitivity_task(arg):
    kw, labels = arg
    return st.sensitivity_study(labels, **kw)


def _efficiency_task(arg):
    kw, combos = arg
    return xp.run_efficiency(combos=combos, **kw)


def _spectrum_task(arg):
    sid, dim, n, r, seed, alpha = arg
    domain = xp.DEFAULT_DOMAIN_1D if dim == 1 else xp.DEFAULT_DOMAIN_2D
    a = 1.0 if dim == 1 else (1.0, 1.0)
    cloud = xp._make_cloud(domain, n, r, xp._master_children(seed, 1)[0])
    scheme = build_scheme(sid, cloud, a, alpha=alpha or None)
    rep = st.spectrum(scheme)
    return sid, rep.eigs, rep.dt_euler


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(spec: RunSpec, outdir):
    domain = xp.DEFAULT_DOMAIN_1D if spec.dim == 1 else xp.DEFAULT_DOMAIN_2D
    a = 1.0 if spec.dim == 1 else (1.0, 1.0)
    label = spec.schemes[0]
    combo = xp.parse_combo(label, tableau=spec.tableau)
    cloud = xp._make_cloud(domain, spec.n, spec.r,
                           xp._master_children(spec.seed, 1)[0])
    scheme = build_scheme(combo.scheme_id, cloud, a,
                          alpha=spec.alpha or None,
                          weno_eps=spec.weno_eps or None)
    u0 = xp.ic_values(spec.ic, cloud.points)
    m0 = xp.total_mass(u0, cloud)
    mood_cfg = MoodConfig(mode=spec.mood_mode) if combo.mood else None

    import time
    t0 = time.perf_counter()
    status, events, diags = "ok", 0, []
    try:
        res = integrate(scheme, u0, spec.t_end, cfl=spec.cfl,
                        tableau=spec.tableau, mood=mood_cfg,
                        n_steps=spec.n_steps or None, record=True)
        u, t_final, events, diags = res.u, res.t, res.mood_events, res.diagnostics
    except NonFiniteState as e:
        u = np.full(cloud.n, np.nan)
        t_final = e.t
        status = "unstable"
    wall = time.perf_counter() - t0

    exact = xp.exact_solution(spec.ic, domain, cloud.points, a, t_final)
    err = xp.error_rel_l2(u, exact) if status == "ok" else float("inf")
    if err > xp.UNSTABLE_ERROR:
        status = "unstable"
    mass_ratio = xp.total_mass(u, cloud) / m0 if status == "ok" else float("nan")

    rec = xp.ExperimentRecord(
        scheme=label, n=cloud.n, r=spec.r * cloud.dx, seed=spec.seed,
        cfl=spec.cfl, t_end=t_final, error_rel_l2=err, wall_time=wall,
        setup_time=0.0, mass_ratio=mass_ratio,
        mood_events=events, status=status)
    _write_csv(os.path.join(outdir, "run.csv"), RECORD_HEADER,
               [_record_row(rec)])

    _write_csv(os.path.join(outdir, "diagnostics.csv"),
               ("step", "t", "dt", "mass", "min", "max", "mood_events"),
               [(d.step, d.t, d.dt, d.mass, d.umin, d.umax, d.mood_events)
                for d in diags])

    if spec.dim == 1:
        sol_header = ("index", "x", "u")
        sol_rows = [(i, cloud.points[i, 0], u[i]) for i in range(cloud.n)]
    else:
        sol_header = ("index", "x", "y", "u")
        sol_rows = [(i, cloud.points[i, 0], cloud.points[i, 1], u[i])
                    for i in range(cloud.n)]
    _write_csv(os.path.join(outdir, "solution.csv"), sol_header, sol_rows)
    print(f"{label}: N={cloud.n} err={err:.4e} status={status} "
          f"mood_events={events}")
    return True


def cmd_convergence(spec: RunSpec, outdir):
    kw = dict(dim=spec.dim, ic_id=spec.ic, n_values=list(spec.n_values),
              cfl=spec.cfl, t_end=spec.t_end, master_seed=spec.seed,
              r_factor=spec.r, tableau=spec.tableau)
    labels = list(spec.schemes)
    parts = _pmap(_convergence_task,
                  [(kw, c) for c in _chunks(labels, spec.jobs)], spec.jobs)
    records = [r for recs, _ in parts for r in recs]
    slopes = {}
    for _, s in parts:
        slopes.update(s)

    # canonical row order: grid-size major, then the --schemes order
    order = {lab: i for i, lab in enumerate(labels)}
    records.sort(key=lambda r: (r.seed, order[r.scheme]))
    _write_csv(os.path.join(outdir, "convergence.csv"), RECORD_HEADER,
               [_record_row(r) for r in records])
    _write_csv(os.path.join(outdir, "slopes.csv"), ("scheme", "slope"),
               [(lab, slopes[lab]) for lab in labels])

    lines = _plot_header("convergence", "points", "relative l2 error",
                         logxy=True)
    lines.append("plot \\")
    lines.append(", \\\n".join(_series_clauses(
        "convergence.csv", labels, 1, "$2", 7, "linespoints")))
    _write_plot(os.path.join(outdir, "convergence.plt"), lines)

    for lab in labels:
        print(f"{lab}: slope {slopes[lab]:.3f}")
    return True


def cmd_spectrum(spec: RunSpec, outdir):
    n_points = spec.n if spec.dim == 1 else spec.n ** 2
    if n_points > MAX_EIG_POINTS:
        raise ConfigError(f"spectrum needs a dense eigensolve; {n_points} "
                          f"points exceeds the cap of {MAX_EIG_POINTS}")
    labels = list(spec.schemes)
    for lab in labels:
        if xp.parse_combo(lab).scheme_id == "weno2" or lab.endswith("+mood"):
            raise ConfigError(f"{lab!r} has no operator matrix; spectra "
                              "exist for linear schemes only")
    tasks = [(lab, spec.dim, spec.n, spec.r, spec.seed, spec.alpha)
             for lab in labels]
    results = _pmap(_spectrum_task, tasks, spec.jobs)

    rows = []
    for sid, eigs, dt_euler in results:
        for z in eigs:
            rows.append((sid, z.real, z.imag, dt_euler))
    _write_csv(os.path.join(outdir, "spectrum.csv"),
               ("scheme", "re", "im", "dt_euler"), rows)

    brows = []
    for name, order in _RK_ORDER.items():
        for re_, im_ in st.rk_stability_boundary(name):
            brows.append((order, re_, im_))
    brows.sort(key=lambda r: r[0])
    _write_csv(os.path.join(outdir, "rk_boundary.csv"),
               ("order", "re", "im"), brows)

    lines = _plot_header("operator spectra, scaled by the Euler step",
                         "re", "im")
    lines.append("set size ratio -1")
    lines.append("plot \\")
    clauses = _series_clauses("spectrum.csv", labels, 1, "$2*$4", "($3*$4)",
                              "points")
    for order in sorted(set(_RK_ORDER.values())):
        clauses.append(f'  "rk_boundary.csv" using ($1=={order} ? $2 : NaN):3 '
                       f'with lines title "rk order {order}"')
    lines.append(", \\\n".join(clauses))
    _write_plot(os.path.join(outdir, "spectrum.plt"), lines)
    print(f"wrote spectra for {len(labels)} schemes, N={n_points}")
    return True


def cmd_sensitivity(spec: RunSpec, outdir):
    domain = xp.DEFAULT_DOMAIN_1D if spec.dim == 1 else xp.DEFAULT_DOMAIN_2D
    worst = max(spec.n_values) ** spec.dim
    if worst > MAX_EIG_POINTS:
        raise ConfigError(f"sensitivity eigensolves need <= {MAX_EIG_POINTS} "
                          f"points; {worst} requested")
    labels = list(spec.schemes)
    for lab in labels:
        if xp.parse_combo(lab).scheme_id == "weno2" or lab.endswith("+mood"):
            raise ConfigError(f"{lab!r} has no operator matrix; use the "
                              "long-run crosscheck instead")
    kw = dict(domain=domain, n_values=list(spec.n_values),
              r_factors=list(spec.r_values), n_grids=spec.n_grids,
              master_seed=spec.seed, alpha=spec.alpha or None)
    parts = _pmap(_sensitivity_task,
                  [(kw, c) for c in _chunks(labels, spec.jobs)], spec.jobs)
    rows = [r for part in parts for r in part]

    order = {lab: i for i, lab in enumerate(labels)}
    nidx = {n: i for i, n in enumerate(spec.n_values)}
    rows.sort(key=lambda r: (nidx[r.n], r.r, order[r.scheme_id]))
    _write_csv(os.path.join(outdir, "sensitivity.csv"),
               ("scheme", "N", "r", "pct_unstable"),
               [(r.scheme_id, r.n, r.r, r.pct_unstable) for r in rows])
    for r in rows:
        print(f"{r.scheme_id:10s} N={r.n:5d} r={r.r:.4g} "
              f"unstable {r.pct_unstable:.1f}%")
    return True


def cmd_dirichlet(spec: RunSpec, outdir):
    results = xp.run_dirichlet(n=spec.n, cfl=spec.cfl, t_end=spec.t_end,
                               schemes=spec.schemes, master_seed=spec.seed,
                               r_factor=spec.r, tableau=spec.tableau)
    rows = []
    for res in results:
        idx = np.argsort(res.x)
        for i in idx:
            rows.append((res.scheme, int(i), res.x[i], res.u[i]))
    _write_csv(os.path.join(outdir, "dirichlet.csv"),
               ("scheme", "index", "x", "u"), rows)
    _write_csv(os.path.join(outdir, "dirichlet_summary.csv"),
               ("scheme", "overshoot", "umin", "boundary_value", "finite",
                "mood_events"),
               [(r.scheme, r.overshoot, r.umin, r.boundary_value, r.finite,
                 r.mood_events) for r in results])

    labels = [r.scheme for r in results]
    lines = _plot_header("shock profile with pinned inflow", "x", "u")
    lines.append("plot \\")
    lines.append(", \\\n".join(_series_clauses(
        "dirichlet.csv", labels, 1, "$3", 4, "lines")))
    _write_plot(os.path.join(outdir, "dirichlet.plt"), lines)
    for r in results:
        print(f"{r.scheme:14s} overshoot={r.overshoot:+.4f} "
              f"min={r.umin:+.4f} finite={r.finite}")
    return True


def cmd_conservation(spec: RunSpec, outdir):
    series = xp.run_conservation(n=spec.n, schemes=spec.schemes, cfl=spec.cfl,
                                 t_end=spec.t_end, master_seed=spec.seed,
                                 r_factor=spec.r, tableau=spec.tableau)
    rows = []
    for s in series:
        for t, ratio in zip(s.t, s.ratio):
            rows.append((s.scheme, t, ratio))
    _write_csv(os.path.join(outdir, "mass.csv"),
               ("scheme", "t", "mass_ratio"), rows)
    _write_csv(os.path.join(outdir, "conservation_summary.csv"),
               ("scheme", "final_ratio", "max_drift"),
               [(s.scheme, s.final_ratio, s.max_drift) for s in series])

    labels = [s.scheme for s in series]
    lines = _plot_header("total mass, normalized", "t", "m(t)/m(0)")
    lines.append("plot \\")
    lines.append(", \\\n".join(_series_clauses(
        "mass.csv", labels, 1, "$2", 3, "lines")))
    _write_plot(os.path.join(outdir, "mass.plt"), lines)
    for s in series:
        print(f"{s.scheme:14s} final={s.final_ratio:.4f} "
              f"max_drift={s.max_drift:.4f}")
    return True


def cmd_efficiency(spec: RunSpec, outdir):
    if spec.schemes:
        combos = [xp.parse_combo(lab, tableau=spec.tableau,
                                 cfl=spec.cfl or 0.5)
                  for lab in spec.schemes]
    else:
        combos = list(xp.EFFICIENCY_COMBOS_1D if spec.dim == 1
                      else xp.EFFICIENCY_COMBOS_2D)
    kw = dict(dim=spec.dim, n_values=list(spec.n_values), t_end=spec.t_end,
              ic_id=spec.ic, n_grids=spec.n_grids, master_seed=spec.seed,
              r_factor=spec.r)
    parts = _pmap(_efficiency_task,
                  [(kw, c) for c in _chunks(combos, spec.jobs)], spec.jobs)
    records = [r for part in parts for r in part]

    labels = [c.label for c in combos]
    order = {lab: i for i, lab in enumerate(labels)}
    totals = [n ** spec.dim for n in spec.n_values]
    records.sort(key=lambda r: (totals.index(r.n), r.seed, order[r.scheme]))
    _write_csv(os.path.join(outdir, "efficiency_runs.csv"), RECORD_HEADER,
               [_record_row(r) for r in records])

    summary = xp.summarize_efficiency(records)
    _write_csv(os.path.join(outdir, "efficiency.csv"),
               ("scheme", "n", "mean_error", "mean_wall_time",
                "mean_setup_time", "n_ok", "n_unstable"),
               [(s.scheme, s.n, s.mean_error, s.mean_wall_time,
                 s.mean_setup_time, s.n_ok, s.n_unstable) for s in summary])

    lines = _plot_header("efficiency", "mean integration time [s]",
                         "relative l2 error", logxy=True)
    lines.append("plot \\")
    lines.append(", \\\n".join(_series_clauses(
        "efficiency.csv", labels, 1, "$4", 3, "linespoints")))
    _write_plot(os.path.join(outdir, "efficiency.plt"), lines)

    for s in summary:
        print(f"{s.scheme:16s} N={s.n:7d} err={s.mean_error:.4e} "
              f"time={s.mean_wall_time:.3f}s unstable={s.n_unstable}")
    return True


COMMANDS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "spectrum": cmd_spectrum,
    "sensitivity": cmd_sensitivity,
    "dirichlet": cmd_dirichlet,
    "conservation": cmd_conservation,
    "efficiency": cmd_efficiency,
}


def main(argv=None) -> int:
    try:
        spec = parse_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as e:
        print(f"meshless: error: {e}", file=sys.stderr)
        return 2

    outdir = spec.out
    try:
        os.makedirs(outdir, exist_ok=True)
        _write_manifest(spec, outdir)
        ok = COMMANDS[spec.subcommand](spec, outdir)
    except ConfigError as e:
        print(f"meshless: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"meshless: io error: {e}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
