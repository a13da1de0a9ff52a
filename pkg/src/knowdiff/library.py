"""Prior-trajectory library: segmentation, rule classification, averaging.

Drive logs are cut into fixed windows, each window is classified to a
meta-action by geometric/kinematic thresholds, and windows sharing a label
are averaged per timestep into that label's prior trajectory. The resulting
library is a bijective, indexable map meta-action -> prior.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .actions import Direction, MetaAction, SpeedProfile
from .exceptions import EmptyDataError, IncompatibleDataError
from .formats import MAGIC_LIBRARY, read_envelope, write_envelope
from .trajectory import FeatureVector, Trajectory, extract_features, to_ego_frame

# Direction thresholds (magnitudes; signs select the side).
U_TURN_MIN_HEADING = math.radians(150.0)
TURN_MIN_HEADING = math.radians(15.0)
LANE_CHANGE_MIN_LATERAL = 2.0   # m
LANE_CHANGE_MAX_LATERAL = 4.0   # m
STRAIGHT_MAX_LATERAL = 0.5      # m
# Speed thresholds.
ACCEL_THRESHOLD = 0.5           # m/s^2
CRUISE_MAX_ACCEL = 0.3          # m/s^2
BRAKE_FINAL_SPEED = 0.5         # m/s
# Gap zones between published regions are split at the midpoint (nearest
# boundary wins; exact midpoint resolves to the milder class).
_LATERAL_GAP_SPLIT = 0.5 * (STRAIGHT_MAX_LATERAL + LANE_CHANGE_MIN_LATERAL)
_ACCEL_GAP_SPLIT = 0.5 * (CRUISE_MAX_ACCEL + ACCEL_THRESHOLD)
# Elapsed time the endpoint-difference acceleration spans for the canonical
# 16-point / 0.5 s window; used to estimate the final speed for the brake
# rule from (mean_speed, mean_accel) under a linear speed profile.
FEATURE_WINDOW_ELAPSED_S = 7.0

LIBRARY_VERSION = 1


def classify(features: FeatureVector) -> MetaAction:
    """Deterministic threshold classification of a feature vector.

    Total over all finite inputs: the gap zones the thresholds leave open are
    resolved by nearest-boundary assignment.
    """
    abs_psi = abs(features.heading_change)
    abs_lat = abs(features.lateral_disp)
    if abs_psi > U_TURN_MIN_HEADING:
        direction = Direction.U_TURN
    elif abs_psi > TURN_MIN_HEADING:
        direction = Direction.LEFT_TURN if features.heading_change > 0 else Direction.RIGHT_TURN
    elif abs_lat > _LATERAL_GAP_SPLIT:
        direction = (Direction.LANE_CHANGE_LEFT if features.lateral_disp > 0
                     else Direction.LANE_CHANGE_RIGHT)
    else:
        direction = Direction.GO_STRAIGHT

    a_bar = features.mean_accel
    # final speed estimate assuming a linear speed profile over the window
    final_speed = max(0.0, features.mean_speed + 0.5 * FEATURE_WINDOW_ELAPSED_S * a_bar)
    if a_bar < -ACCEL_THRESHOLD and final_speed < BRAKE_FINAL_SPEED:
        speed = SpeedProfile.BRAKE
    elif a_bar > ACCEL_THRESHOLD:
        speed = SpeedProfile.ACCELERATE
    elif a_bar < -ACCEL_THRESHOLD:
        speed = SpeedProfile.DECELERATE
    elif abs(a_bar) < _ACCEL_GAP_SPLIT:
        speed = SpeedProfile.CRUISE
    else:
        speed = SpeedProfile.ACCELERATE if a_bar > 0 else SpeedProfile.DECELERATE
    return MetaAction(direction, speed)


def segment_log(log, window_s: float = 8.0) -> list[Trajectory]:
    """Cut a drive log into non-overlapping windows of `window_s` seconds.

    Each window's ego positions are transformed into the frame of the window's
    first ego state. A trailing remainder shorter than one window is dropped;
    a log shorter than one window yields an empty list.
    """
    if window_s <= 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    n_points = int(round(window_s / log.dt))
    if n_points < 2:
        raise ValueError(f"window of {window_s} s spans fewer than 2 samples at dt={log.dt}")
    segments = []
    frames = log.frames
    for start in range(0, len(frames) - n_points + 1, n_points):
        window = frames[start:start + n_points]
        anchor = window[0].ego
        pts = np.array([[f.ego.x, f.ego.y] for f in window])
        segments.append(to_ego_frame(Trajectory(pts, log.dt), anchor))
    return segments


@dataclass(frozen=True)
class LibraryEntry:
    action: MetaAction
    prior: Trajectory
    sample_count: int
    feature_mean: FeatureVector


@dataclass(frozen=True)
class PriorLibrary:
    """Bijective, indexable map from meta-action index to library entry."""

    entries: dict[int, LibraryEntry]
    horizon: int
    dt: float
    version: int = LIBRARY_VERSION

    def __post_init__(self):
        for index, entry in self.entries.items():
            if entry.action.index != index:
                raise ValueError(
                    f"entry keyed {index} holds action index {entry.action.index}")
            if len(entry.prior) != self.horizon:
                raise ValueError(
                    f"entry {entry.action.label} has horizon {len(entry.prior)}, "
                    f"library declares {self.horizon}")
            if entry.sample_count < 1:
                raise ValueError(f"entry {entry.action.label} has sample_count < 1")

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, action: MetaAction) -> LibraryEntry | None:
        return self.entries.get(action.index)

    def actions(self) -> list[MetaAction]:
        return [self.entries[i].action for i in sorted(self.entries)]


def _content_hash(segment: Trajectory) -> bytes:
    return hashlib.sha256(segment.points.tobytes()).digest()


def build_library(segments: list[Trajectory]) -> PriorLibrary:
    """Group segments by classified meta-action and average each group.

    Accumulation order is fixed by sorting members on a content hash, so a
    rebuild from any permutation of the same segments is bit-identical.
    """
    if not segments:
        return PriorLibrary(entries={}, horizon=0, dt=0.0)
    horizon = len(segments[0])
    dt = segments[0].dt
    for seg in segments:
        if len(seg) != horizon or abs(seg.dt - dt) > 1e-12:
            raise IncompatibleDataError(
                "all segments must share horizon and dt "
                f"(expected {horizon} @ {dt}, got {len(seg)} @ {seg.dt})")

    groups: dict[int, list[Trajectory]] = {}
    feats: dict[int, list[FeatureVector]] = {}
    for seg in segments:
        f = extract_features(seg)
        action = classify(f)
        groups.setdefault(action.index, []).append(seg)
        feats.setdefault(action.index, []).append(f)

    entries = {}
    for index, members in groups.items():
        order = sorted(range(len(members)), key=lambda i: _content_hash(members[i]))
        acc = np.zeros((horizon, 2))
        feat_acc = np.zeros(5)
        for i in order:
            acc += members[i].points
            feat_acc += feats[index][i].as_array()
        n = len(members)
        entries[index] = LibraryEntry(
            action=MetaAction.from_index(index),
            prior=Trajectory(acc / n, dt),
            sample_count=n,
            feature_mean=FeatureVector.from_array(feat_acc / n),
        )
    return PriorLibrary(entries=entries, horizon=horizon, dt=dt)


_LIB_HEADER = struct.Struct("<IdI")
_ENTRY_HEADER = struct.Struct("<IQ")


def save_library(lib: PriorLibrary, path) -> None:
    chunks = [_LIB_HEADER.pack(lib.horizon, lib.dt, len(lib.entries))]
    for index in sorted(lib.entries):
        entry = lib.entries[index]
        chunks.append(_ENTRY_HEADER.pack(index, entry.sample_count))
        chunks.append(entry.feature_mean.as_array().tobytes())
        chunks.append(np.ascontiguousarray(entry.prior.points).tobytes())
    write_envelope(path, MAGIC_LIBRARY, b"".join(chunks), version=lib.version)


def load_library(path) -> PriorLibrary:
    payload = read_envelope(path, MAGIC_LIBRARY, version=LIBRARY_VERSION)
    horizon, dt, n_entries = _LIB_HEADER.unpack_from(payload)
    offset = _LIB_HEADER.size
    prior_bytes = horizon * 2 * 8
    entries = {}
    for _ in range(n_entries):
        index, count = _ENTRY_HEADER.unpack_from(payload, offset)
        offset += _ENTRY_HEADER.size
        feat = np.frombuffer(payload, dtype=np.float64, count=5, offset=offset)
        offset += 5 * 8
        pts = np.frombuffer(payload, dtype=np.float64, count=horizon * 2, offset=offset)
        offset += prior_bytes
        entries[index] = LibraryEntry(
            action=MetaAction.from_index(index),
            prior=Trajectory(pts.reshape(horizon, 2), dt),
            sample_count=count,
            feature_mean=FeatureVector.from_array(feat),
        )
    return PriorLibrary(entries=entries, horizon=horizon, dt=dt)


class PriorLibraryBuilder(BaseEstimator):
    """Estimator facade over the rule classifier and library averaging.

    fit(X) consumes a list of equal-grid Trajectory segments and exposes the
    built library as `library_`; predict(X) returns meta-action indices and
    transform(X) the (n, 5) feature matrix.
    """

    def fit(self, X, y=None):
        if not X:
            raise EmptyDataError("cannot fit a prior library on zero segments")
        self.library_ = build_library(list(X))
        self.labels_ = self.predict(X)
        return self

    def predict(self, X):
        return np.array([classify(extract_features(seg)).index for seg in X], dtype=np.int64)

    def transform(self, X):
        return np.stack([extract_features(seg).as_array() for seg in X])

    def _check_fitted(self):
        if not hasattr(self, "library_"):
            raise NotFittedError("PriorLibraryBuilder is not fitted yet")

    def save(self, path):
        self._check_fitted()
        save_library(self.library_, path)
