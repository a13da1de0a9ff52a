"""Trajectory types, coordinate frames, and kinematic feature extraction.

Trajectories are fixed-horizon sequences of 2D waypoints at a uniform time
step; pose trajectories carry an additional unit heading vector per frame.
All functions here are pure and operate on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateTrajectoryError
from .validation import ensure_finite

DEFAULT_HORIZON = 16
DEFAULT_DT = 0.5

_TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=np.float64) + np.pi, _TWO_PI) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + _TWO_PI, wrapped)
    if np.isscalar(angle) or np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


class Waypoint(NamedTuple):
    x: float
    y: float


def _frozen_array(value, shape_tail: tuple[int, ...]) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1:] != shape_tail:
        raise ValueError(f"expected (N, {shape_tail[0]}) array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fixed-horizon sequence of 2D waypoints sampled every `dt` seconds."""

    points: np.ndarray  # (H, 2) float64, read-only
    dt: float

    def __post_init__(self):
        arr = _frozen_array(self.points, (2,))
        if len(arr) < 2:
            raise DegenerateTrajectoryError(f"trajectory needs >= 2 points, got {len(arr)}")
        ensure_finite("trajectory points", arr)
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return len(self.points)

    def waypoint(self, i: int) -> Waypoint:
        return Waypoint(float(self.points[i, 0]), float(self.points[i, 1]))


@dataclass(frozen=True, eq=False)
class PoseTrajectory:
    """Sequence of (x, y, hx, hy) frames; (hx, hy) is a unit heading vector."""

    frames: np.ndarray  # (T, 4) float64, read-only
    dt: float

    HEADING_NORM_TOL = 1e-6

    def __post_init__(self):
        arr = _frozen_array(self.frames, (4,))
        if len(arr) < 1:
            raise DegenerateTrajectoryError("pose trajectory needs >= 1 frame")
        ensure_finite("pose frames", arr)
        norms = np.hypot(arr[:, 2], arr[:, 3])
        if np.any(np.abs(norms - 1.0) > self.HEADING_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(f"heading vectors must be unit norm (worst deviation {worst:.2e})")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "frames", arr)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def positions(self) -> np.ndarray:
        return self.frames[:, :2]

    @property
    def headings(self) -> np.ndarray:
        return self.frames[:, 2:]

    def to_trajectory(self) -> Trajectory:
        """Drop heading channels; positions are preserved bit-exactly."""
        return Trajectory(self.frames[:, :2], self.dt)


@dataclass(frozen=True)
class EgoState:
    """Planar vehicle state; heading is normalized to (-pi, pi] on construction."""

    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.heading, self.speed)):
            raise ValueError("ego state values must be finite")
        if self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def frame_vector(self) -> np.ndarray:
        """(x, y, cos heading, sin heading) — the 1x4 channel layout shared with pose frames."""
        return np.array([self.x, self.y, math.cos(self.heading), math.sin(self.heading)])


@dataclass(frozen=True)
class FeatureVector:
    """Summary dynamics of one trajectory segment.

    `lateral_disp` and `heading_change` are signed (positive = left);
    the classifier thresholds apply to their magnitudes.
    """

    mean_speed: float
    mean_accel: float
    heading_variation: float
    lateral_disp: float
    heading_change: float

    def __post_init__(self):
        values = (self.mean_speed, self.mean_accel, self.heading_variation,
                  self.lateral_disp, self.heading_change)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("feature values must be finite")
        if self.mean_speed < 0.0 or self.heading_variation < 0.0:
            raise ValueError("mean_speed and heading_variation must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_speed, self.mean_accel, self.heading_variation,
                         self.lateral_disp, self.heading_change])

    @classmethod
    def from_array(cls, arr) -> "FeatureVector":
        a = np.asarray(arr, dtype=np.float64)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]), float(a[4]))


def _step_distances(traj: Trajectory) -> np.ndarray:
    return np.linalg.norm(np.diff(traj.points, axis=0), axis=1)


def _segment_headings(points: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-segment headings with zero-length segments reusing the previous heading.

    Leading zero-length segments are backfilled with the first valid heading so
    they contribute no spurious variation. Returns (headings, any_valid).
    """
    diffs = np.diff(points, axis=0)
    lengths = np.hypot(diffs[:, 0], diffs[:, 1])
    headings = np.zeros(len(diffs))
    prev = None
    for i in range(len(diffs)):
        if lengths[i] > 0.0:
            prev = math.atan2(diffs[i, 1], diffs[i, 0])
        headings[i] = prev if prev is not None else np.nan
    if prev is None:
        return np.zeros(len(diffs)), False
    # backfill leading invalid entries with the first valid heading
    valid_idx = np.flatnonzero(lengths > 0.0)[0]
    headings[:valid_idx] = headings[valid_idx]
    return headings, True


def mean_speed(traj: Trajectory) -> float:
    """Average speed from chord lengths: sum(dist) / ((H-1) * dt)."""
    if len(traj) < 2:
        raise DegenerateTrajectoryError("mean_speed needs >= 2 points")
    d = _step_distances(traj)
    return float(d.sum() / ((len(traj) - 1) * traj.dt))


def heading_variation(traj: Trajectory) -> float:
    """Total absolute heading variation over segment orientations, each
    difference wrapped to (-pi, pi] before taking the absolute value."""
    if len(traj) < 3:
        raise DegenerateTrajectoryError("heading_variation needs >= 3 points")
    headings, any_valid = _segment_headings(traj.points)
    if not any_valid:
        return 0.0
    deltas = wrap_angle(np.diff(headings))
    return float(np.sum(np.abs(deltas)))


def mean_accel(traj: Trajectory) -> float:
    """Endpoint speed difference over elapsed time between first and last chord."""
    if len(traj) < 3:
        raise DegenerateTrajectoryError("mean_accel needs >= 3 points")
    speeds = _step_distances(traj) / traj.dt
    return float((speeds[-1] - speeds[0]) / ((len(traj) - 2) * traj.dt))


def extract_features(traj: Trajectory) -> FeatureVector:
    """Full feature vector for the maneuver classifier.

    lateral_disp is the endpoint's lateral offset in the frame anchored at the
    first point with +x along the initial segment heading; heading_change is
    the signed net change between first and last segment headings.
    """
    if len(traj) < 3:
        raise DegenerateTrajectoryError("extract_features needs >= 3 points")
    v_bar = mean_speed(traj)
    a_bar = mean_accel(traj)
    d_theta = heading_variation(traj)
    headings, any_valid = _segment_headings(traj.points)
    if any_valid:
        theta0 = headings[0]
        net = wrap_angle(headings[-1] - theta0)
    else:
        theta0 = 0.0
        net = 0.0
    delta = traj.points[-1] - traj.points[0]
    lateral = -math.sin(theta0) * delta[0] + math.cos(theta0) * delta[1]
    return FeatureVector(v_bar, a_bar, d_theta, float(lateral), float(net))


def to_ego_frame(traj: Trajectory, anchor: EgoState) -> Trajectory:
    """Rigid transform into the anchor's frame: anchor maps to the origin with
    its heading along +x."""
    return Trajectory(points_to_ego_frame(traj.points, anchor), traj.dt)


def from_ego_frame(traj: Trajectory, anchor: EgoState) -> Trajectory:
    """Inverse of `to_ego_frame`."""
    c, s = math.cos(anchor.heading), math.sin(anchor.heading)
    x, y = traj.points[:, 0], traj.points[:, 1]
    gx = c * x - s * y + anchor.x
    gy = s * x + c * y + anchor.y
    return Trajectory(np.column_stack([gx, gy]), traj.dt)


def points_to_ego_frame(points: np.ndarray, anchor: EgoState) -> np.ndarray:
    """Array form of `to_ego_frame` for raw (N, 2) coordinates."""
    c, s = math.cos(anchor.heading), math.sin(anchor.heading)
    dx = points[:, 0] - anchor.x
    dy = points[:, 1] - anchor.y
    return np.column_stack([c * dx + s * dy, -s * dx + c * dy])


def extend_heading(traj: Trajectory) -> PoseTrajectory:
    """Lift 2D waypoints to 4D frames with the canonical heading vector (1, 0)."""
    frames = np.zeros((len(traj), 4))
    frames[:, :2] = traj.points
    frames[:, 2] = 1.0
    return PoseTrajectory(frames, traj.dt)
