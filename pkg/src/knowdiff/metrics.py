"""Displacement metrics and the open-loop evaluation protocol.

A 10 s log splits into a 2 s observation prefix and an 8 s prediction
horizon; predictions and ground truth are compared in the frame of the ego
state at the split point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import MetricError, ShapeError
from .scenarios import DriveLog, observation_at, history_frame_count
from .trajectory import Trajectory, to_ego_frame
from .validation import ensure_same_grid

logger = logging.getLogger(__name__)

# A sample is a miss when displacement exceeds any of these (strictly).
MISS_THRESHOLDS = ((3.0, 2.0), (5.0, 4.0), (8.0, 8.0))  # (horizon s, meters)


def ade(pred: Trajectory, gt: Trajectory) -> float:
    """Mean Euclidean displacement over all timesteps."""
    ensure_same_grid("pred", pred, "gt", gt)
    return float(np.mean(np.linalg.norm(pred.points - gt.points, axis=1)))


def fde_at(pred: Trajectory, gt: Trajectory, horizon_s: float) -> float:
    """Displacement at the waypoint `horizon_s` seconds in (1-based index h/dt)."""
    ensure_same_grid("pred", pred, "gt", gt)
    steps = horizon_s / pred.dt
    idx = int(round(steps))
    if abs(steps - idx) > 1e-9 or not (1 <= idx <= len(pred)):
        raise ShapeError(
            f"horizon {horizon_s}s is not a valid multiple of dt={pred.dt} "
            f"within the {len(pred)}-point trajectory")
    return float(np.linalg.norm(pred.points[idx - 1] - gt.points[idx - 1]))


def is_miss(pred: Trajectory, gt: Trajectory,
            thresholds=MISS_THRESHOLDS) -> bool:
    return any(fde_at(pred, gt, h) > limit for h, limit in thresholds)


def miss_rate(preds: list[Trajectory], gts: list[Trajectory],
              thresholds=MISS_THRESHOLDS) -> float:
    if not preds or len(preds) != len(gts):
        raise MetricError(
            f"miss_rate needs equal non-empty lists, got {len(preds)} vs {len(gts)}")
    misses = sum(is_miss(p, g, thresholds) for p, g in zip(preds, gts))
    return misses / len(preds)


@dataclass(frozen=True)
class OpenLoopReport:
    ade_8s: float
    fde_3s: float
    fde_5s: float
    fde_8s: float
    miss_rate: float
    sample_count: int
    skipped_count: int = 0

    def to_dict(self) -> dict:
        return {
            "ade_8s": self.ade_8s, "fde_3s": self.fde_3s, "fde_5s": self.fde_5s,
            "fde_8s": self.fde_8s, "miss_rate": self.miss_rate,
            "sample_count": self.sample_count, "skipped_count": self.skipped_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "OpenLoopReport":
        return cls(ade_8s=doc["ade_8s"], fde_3s=doc["fde_3s"], fde_5s=doc["fde_5s"],
                   fde_8s=doc["fde_8s"], miss_rate=doc["miss_rate"],
                   sample_count=doc["sample_count"], skipped_count=doc["skipped_count"])


def ground_truth_future(log: DriveLog, horizon: int = 16) -> tuple:
    """(observation at the split frame, ego-frame future trajectory)."""
    n_hist = history_frame_count(log.dt)
    if len(log.frames) < n_hist + horizon:
        raise MetricError(
            f"log has {len(log.frames)} frames, need {n_hist + horizon}")
    split_idx = n_hist - 1
    obs = observation_at(log, split_idx)
    future = log.frames[n_hist:n_hist + horizon]
    pts = np.array([[f.ego.x, f.ego.y] for f in future])
    gt = to_ego_frame(Trajectory(pts, log.dt), obs.ego)
    return obs, gt


def evaluate_open_loop(planner, logs: list[DriveLog], horizon: int = 16) -> OpenLoopReport:
    """Run the 2 s -> 8 s prediction protocol over a log set."""
    preds, gts = [], []
    skipped = 0
    for log in logs:
        n_hist = history_frame_count(log.dt)
        if len(log.frames) < n_hist + horizon:
            logger.warning("skipping short log (kind=%s seed=%d, %d frames)",
                           log.kind, log.seed, len(log.frames))
            skipped += 1
            continue
        if hasattr(planner, "observe_log"):
            planner.observe_log(log)
        obs, gt = ground_truth_future(log, horizon)
        pred = planner.plan(obs)
        preds.append(pred)
        gts.append(gt)
    if not preds:
        raise MetricError("no usable logs for open-loop evaluation")
    return OpenLoopReport(
        ade_8s=float(np.mean([ade(p, g) for p, g in zip(preds, gts)])),
        fde_3s=float(np.mean([fde_at(p, g, 3.0) for p, g in zip(preds, gts)])),
        fde_5s=float(np.mean([fde_at(p, g, 5.0) for p, g in zip(preds, gts)])),
        fde_8s=float(np.mean([fde_at(p, g, 8.0) for p, g in zip(preds, gts)])),
        miss_rate=miss_rate(preds, gts),
        sample_count=len(preds),
        skipped_count=skipped,
    )
