"""A-posteriori acceptance tests for candidate time steps.

A candidate solution is screened point by point against the previous
state.  Points that pass keep their high-order update; rejected points
are meant to be recomputed with a robust fallback scheme by the time
integrator.  The cascade, in order:

1. discrete maximum principle over the stencil of the previous state,
2. flat-region exemption (local oscillation below the cube of the
   cell size is indistinguishable from roundoff),
3. curvature-extremum relaxation: an extremum is tolerated when the
   second derivatives on the stencil agree in sign and magnitude,
   which is the signature of a smooth extremum rather than a spurious
   one.

Step 3 is skipped in ``strict_dmp`` mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .pointcloud import PointCloud, cell_sizes

MODES = ("strict_dmp", "relaxed_u2")

REASON_DMP_OK = 0
REASON_FLAT = 1
REASON_U2_EXTREMUM = 2
REASON_REJECTED = 3

REASON_NAMES = ("dmp_ok", "flat_region", "u2_extremum", "rejected")


@dataclass(frozen=True)
class MoodConfig:
    mode: str = "relaxed_u2"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")


@dataclass(frozen=True)
class MoodReport:
    accepted: np.ndarray  # bool, per point
    reason: np.ndarray    # uint8, REASON_* codes
    n_events: int         # number of rejected points

    def counts(self):
        return {name: int(np.sum(self.reason == code))
                for code, name in enumerate(REASON_NAMES)}


def point_delta(cloud: PointCloud) -> np.ndarray:
    """Per-point length scale used in the flat-region and relaxation
    thresholds.  The local cell size, not h_max: the test must tighten
    under refinement at the same rate as the solution features."""
    return cell_sizes(cloud)


def detect(cloud: PointCloud, u_prev, u_cand, curv, cfg: MoodConfig = MoodConfig(),
           delta=None) -> MoodReport:
    """Screen a candidate state.

    curv: tuple of per-point second-derivative fields of the *previous*
    state, one per axis (length 1 in 1D, 2 in 2D).  Ignored in
    strict_dmp mode but still required, so the caller cannot silently
    forget to provide them.
    """
    u_prev = np.asarray(u_prev, dtype=np.float64)
    u_cand = np.asarray(u_cand, dtype=np.float64)
    if delta is None:
        delta = point_delta(cloud)
    curv = tuple(np.ascontiguousarray(c, dtype=np.float64) for c in curv)
    if len(curv) != cloud.dim:
        raise ValueError(f"expected {cloud.dim} curvature field(s), got {len(curv)}")
    curv_x = curv[0]
    curv_y = curv[1] if cloud.dim == 2 else np.empty(0)
    accept, reason = kernels.mood_detect(
        cloud.indptr, cloud.indices,
        np.ascontiguousarray(u_prev), np.ascontiguousarray(u_cand),
        curv_x, curv_y,
        np.ascontiguousarray(delta, dtype=np.float64),
        cfg.mode == "relaxed_u2")
    accepted = accept.astype(bool)
    return MoodReport(accepted=accepted, reason=reason,
                      n_events=int(np.sum(~accepted)))


# Standalone checks.  These repeat what the fused kernel does, one
# stage at a time, for diagnostics and for testing the kernel against
# an obviously-correct formulation.

def dmp_check(cloud: PointCloud, u_prev, u_cand):
    """True where min/max over the stencil (center included) of the
    previous state bound the candidate.  Closed inequalities: a point
    sitting exactly on the bound is not an overshoot."""
    u_prev = np.asarray(u_prev, dtype=np.float64)
    u_cand = np.asarray(u_cand, dtype=np.float64)
    ok = np.empty(cloud.n, dtype=bool)
    for i in range(cloud.n):
        nb = u_prev[cloud.neighbors(i)]
        lo = min(nb.min(), u_prev[i]) if nb.size else u_prev[i]
        hi = max(nb.max(), u_prev[i]) if nb.size else u_prev[i]
        ok[i] = lo <= u_cand[i] <= hi
    return ok


def flat_region_check(cloud: PointCloud, u_prev, delta=None):
    """True where the previous state varies over the stencil by no more
    than delta**3: roundoff-level wiggles in flat regions must not
    trigger rejections, or the fallback scheme would smear them
    forever."""
    u_prev = np.asarray(u_prev, dtype=np.float64)
    if delta is None:
        delta = point_delta(cloud)
    ok = np.empty(cloud.n, dtype=bool)
    for i in range(cloud.n):
        nb = u_prev[cloud.neighbors(i)]
        lo = min(nb.min(), u_prev[i]) if nb.size else u_prev[i]
        hi = max(nb.max(), u_prev[i]) if nb.size else u_prev[i]
        ok[i] = (hi - lo) <= delta[i] ** 3
    return ok


def u2_check(cloud: PointCloud, curv_axis, delta=None):
    """Smooth-extremum test along one axis.  Over each stencil
    (center included) the second derivatives must not straddle zero
    by more than a delta margin, and their spread must stay moderate:
    either |min|/|max| >= 1/2 or the whole range is below delta."""
    curv = np.asarray(curv_axis, dtype=np.float64)
    if delta is None:
        delta = point_delta(cloud)
    ok = np.empty(cloud.n, dtype=bool)
    for i in range(cloud.n):
        idx = np.append(cloud.neighbors(i), i)
        lo, hi = curv[idx].min(), curv[idx].max()
        same_sign = lo * hi > -delta[i]
        mag = np.abs(curv[idx])
        amin, amax = mag.min(), mag.max()
        ratio_ok = (amax == 0.0) or (amin >= 0.5 * amax) or (amax < delta[i])
        ok[i] = same_sign and ratio_ok
    return ok
