"""Kinematic bicycle model and trajectory-tracking controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import cumulative_arclength, point_at_arclength, project_to_polyline

WHEELBASE_M = 2.7
ACCEL_MIN = -4.0
ACCEL_MAX = 3.0
STEER_MAX = 0.6
SPEED_GAIN = 1.5


@dataclass
class BicycleState:
    x: float
    y: float
    heading: float
    speed: float


def bicycle_step(state: BicycleState, accel: float, steer: float, dt: float,
                 wheelbase: float = WHEELBASE_M) -> BicycleState:
    """One forward-Euler step of the kinematic bicycle; speed never goes negative."""
    accel = min(ACCEL_MAX, max(ACCEL_MIN, accel))
    steer = min(STEER_MAX, max(-STEER_MAX, steer))
    x = state.x + state.speed * math.cos(state.heading) * dt
    y = state.y + state.speed * math.sin(state.heading) * dt
    heading = state.heading + state.speed / wheelbase * math.tan(steer) * dt
    speed = max(0.0, state.speed + accel * dt)
    return BicycleState(x, y, heading, speed)


def pure_pursuit_steer(state: BicycleState, path: np.ndarray,
                       wheelbase: float = WHEELBASE_M,
                       base_lookahead: float = 3.0,
                       lookahead_gain: float = 0.5) -> float:
    """Pure-pursuit steering toward a lookahead point on a path polyline."""
    lookahead = max(base_lookahead, lookahead_gain * state.speed)
    s_here, _ = project_to_polyline(path, (state.x, state.y))
    target = point_at_arclength(path, s_here + lookahead)
    dx, dy = target[0] - state.x, target[1] - state.y
    alpha = math.atan2(dy, dx) - state.heading
    dist = math.hypot(dx, dy)
    if dist < 1e-6:
        return 0.0
    steer = math.atan2(2.0 * wheelbase * math.sin(alpha), dist)
    return min(STEER_MAX, max(-STEER_MAX, steer))


def track_speed(state: BicycleState, target_speed: float,
                gain: float = SPEED_GAIN) -> float:
    """Proportional speed control clamped to the acceleration limits."""
    accel = gain * (target_speed - state.speed)
    return min(ACCEL_MAX, max(ACCEL_MIN, accel))


def plan_target_speed(plan_points: np.ndarray, dt: float, state: BicycleState) -> float:
    """Speed the plan implies near the ego's current progress along it."""
    chords = np.linalg.norm(np.diff(plan_points, axis=0), axis=1)
    if len(chords) == 0:
        return 0.0
    speeds = chords / dt
    cum = cumulative_arclength(plan_points)
    s_here, _ = project_to_polyline(plan_points, (state.x, state.y))
    idx = int(np.searchsorted(cum, s_here, side="right"))
    idx = min(max(idx, 0), len(speeds) - 1)
    return float(speeds[idx])
