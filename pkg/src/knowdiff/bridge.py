"""Meta-action to prior-trajectory bridge: deterministic lookup + alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import MetaAction, SpeedProfile
from .exceptions import LibraryLookupError
from .library import PriorLibrary
from .trajectory import EgoState, Trajectory

ALIGN_SCALE_MIN = 0.5
ALIGN_SCALE_MAX = 2.0
_MIN_PRIOR_SPEED = 0.1  # m/s below which rescaling is meaningless


@dataclass(frozen=True)
class LookupResult:
    requested: MetaAction
    served: MetaAction
    trajectory: Trajectory
    substituted: bool


def lookup(lib: PriorLibrary, action: MetaAction) -> LookupResult:
    """Retrieve the prior for a meta-action.

    Exact entry when present; otherwise the entry sharing the direction with
    the nearest speed value in axis order (flagged as substituted). Direction
    is never substituted — a direction with no entry at all is an error.
    """
    if len(lib) == 0:
        raise LibraryLookupError("prior library is empty")
    entry = lib.get(action)
    if entry is not None:
        return LookupResult(action, entry.action, entry.prior, substituted=False)
    candidates = [
        lib.entries[MetaAction(action.direction, speed).index]
        for speed in SpeedProfile
        if MetaAction(action.direction, speed).index in lib.entries
    ]
    if not candidates:
        raise LibraryLookupError(
            f"no entry with direction {action.direction.name}; "
            f"present actions: {[a.label for a in lib.actions()]}")
    # nearest speed in axis order; ties resolve to the lower speed index
    best = min(candidates,
               key=lambda e: (abs(int(e.action.speed) - int(action.speed)),
                              int(e.action.speed)))
    return LookupResult(action, best.action, best.prior, substituted=True)


def advance_prior(prior: Trajectory, steps: int = 1) -> Trajectory:
    """Re-time the prior onto the prediction grid.

    Library priors describe 8 s of motion from a segment-start pose, while a
    plan describes the 8 s that follow the decision pose, `steps` grid points
    later along the same maneuver. This crops `steps` leading waypoints,
    re-anchors the remainder at the pose the prior itself reaches one step
    before the crop (position plus local travel direction), and extrapolates
    the tail along its final direction to restore the horizon.
    """
    if steps < 1:
        return prior
    pts = prior.points
    if steps >= len(pts) - 1:
        raise ValueError(f"cannot advance a {len(pts)}-point prior by {steps} steps")
    anchor_idx = steps - 1
    direction = None
    for j in range(anchor_idx, len(pts) - 1):
        d = pts[j + 1] - pts[j]
        if np.hypot(d[0], d[1]) > 1e-9:
            direction = d
            break
    theta = 0.0 if direction is None else math.atan2(direction[1], direction[0])
    tail_step = pts[-1] - pts[-2]
    extra = pts[-1] + np.arange(1, steps + 1)[:, None] * tail_step
    source = np.vstack([pts, extra])[steps:steps + len(pts)]
    c, s = math.cos(theta), math.sin(theta)
    shifted = source - pts[anchor_idx]
    local = np.column_stack([c * shifted[:, 0] + s * shifted[:, 1],
                             -s * shifted[:, 0] + c * shifted[:, 1]])
    return Trajectory(local, prior.dt)


def align_prior(prior: Trajectory, ego: EgoState) -> Trajectory:
    """Rescale the prior's arc-length profile to the live ego speed.

    The scale is ego.speed / (prior's initial chord speed), clamped to
    [0.5, 2.0]. Each step displacement is scaled by the same factor, which
    multiplies every cumulative arc length by the scale while preserving all
    segment directions; the first waypoint stays fixed. Near-stationary priors
    are returned unchanged.
    """
    steps = np.diff(prior.points, axis=0)
    initial_speed = float(np.hypot(*steps[0]) / prior.dt)
    if initial_speed < _MIN_PRIOR_SPEED:
        return prior
    scale = ego.speed / initial_speed
    scale = min(ALIGN_SCALE_MAX, max(ALIGN_SCALE_MIN, scale))
    if abs(scale - 1.0) < 1e-12:
        return prior
    points = np.empty_like(prior.points)
    points[0] = prior.points[0]
    points[1:] = prior.points[0] + np.cumsum(scale * steps, axis=0)
    return Trajectory(points, prior.dt)
