"""End-to-end planners and training-data assembly.

The main planner chains: observation -> provider decision -> prior lookup ->
speed alignment -> context encoding -> truncated diffusion inference. Planning
happens in the current ego frame, so the state frame passed to the denoiser is
always (0, 0, 1, 0). Baseline planners (prior-only, straight-line, expert
replay, oracle) share the same `plan(observation)` protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .actions import MetaAction, N_ACTIONS
from .bridge import advance_prior, align_prior, lookup
from .decision import DecisionRecord, HeuristicProvider
from .diffusion.inference import full_sample, truncated_infer
from .diffusion.network import CONTEXT_DIM, DenoiserModel
from .diffusion.schedule import NoiseSchedule
from .diffusion.training import TrainingSet
from .geometry import point_at_arclength, project_to_polyline, tangent_at_arclength
from .library import PriorLibrary
from .metrics import ground_truth_future
from .scene import Observation, route_polyline
from .scenarios import DriveLog, history_frame_count, observation_at
from .trajectory import Trajectory, points_to_ego_frame, to_ego_frame, wrap_angle

GOAL_LOOKAHEAD_M = 40.0
DEFAULT_T1 = 0.05
DEFAULT_T2 = 0.10

_SIGNAL_SLOT = {"red": 0, "yellow": 1, "green": 2}
_EGO_FRAME_STATE = np.array([0.0, 0.0, 1.0, 0.0])


def build_context(obs: Observation, action: MetaAction) -> np.ndarray:
    """32-dim conditioning vector: goal offset (2), goal heading (2), speed,
    signal one-hot (3), meta-action one-hot (24)."""
    ctx = np.zeros(CONTEXT_DIM)
    route = route_polyline(obs)
    if route is not None:
        s_ego, _ = project_to_polyline(route, (obs.ego.x, obs.ego.y))
        goal_s = s_ego + GOAL_LOOKAHEAD_M
        goal = point_at_arclength(route, goal_s)
        local = points_to_ego_frame(goal[None, :], obs.ego)[0]
        ctx[0], ctx[1] = local
        theta = wrap_angle(tangent_at_arclength(route, goal_s) - obs.ego.heading)
        ctx[2], ctx[3] = math.cos(theta), math.sin(theta)
    else:
        ctx[2] = 1.0
    ctx[4] = obs.ego.speed
    route_ids = {lane.lane_id for lane in obs.route_lanes()}
    on_route = [s for s in obs.signals if s.lane_id in route_ids]
    if on_route:
        nearest = min(on_route, key=lambda s: s.distance_m)
        ctx[5 + _SIGNAL_SLOT[nearest.state]] = 1.0
    ctx[8 + action.index] = 1.0
    return ctx


class Planner:
    """Meta-action guided diffusion planner."""

    def __init__(self, library: PriorLibrary, model: DenoiserModel,
                 schedule: NoiseSchedule, provider=None,
                 t1: float = DEFAULT_T1, t2: float = DEFAULT_T2,
                 align: bool = True, seed: int = 0,
                 sampler: str = "truncated", full_steps: int = 50,
                 two_pass: bool = False, exact_marginal: bool = False):
        if not (0.0 < t1 < t2 <= 1.0):
            raise ValueError(f"need 0 < t1 < t2 <= 1, got t1={t1}, t2={t2}")
        if sampler not in ("truncated", "full"):
            raise ValueError(f"sampler must be 'truncated' or 'full', got {sampler!r}")
        self.library = library
        self.model = model
        self.schedule = schedule
        self.provider = provider if provider is not None else HeuristicProvider()
        self.t1, self.t2 = t1, t2
        self.align = align
        self.sampler = sampler
        self.full_steps = full_steps
        self.two_pass = two_pass
        self.exact_marginal = exact_marginal
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.decisions: list[DecisionRecord] = []

    def plan(self, obs: Observation) -> Trajectory:
        record = self.provider.decide(obs)
        self.decisions.append(record)
        ctx = build_context(obs, record.action)
        if self.sampler == "full":
            return full_sample(self.model, self.schedule, _EGO_FRAME_STATE, ctx,
                               self.rng, n_steps=self.full_steps)
        result = lookup(self.library, record.action)
        prior = align_prior(result.trajectory, obs.ego) if self.align else result.trajectory
        prior = advance_prior(prior)
        return truncated_infer(self.model, self.schedule, prior, _EGO_FRAME_STATE,
                               ctx, self.t1, self.t2, self.rng,
                               exact_marginal=self.exact_marginal,
                               two_pass=self.two_pass)


class PriorOnlyPlanner:
    """Bridge output with no denoising — the raw-prior baseline."""

    def __init__(self, library: PriorLibrary, provider=None, align: bool = True):
        self.library = library
        self.provider = provider if provider is not None else HeuristicProvider()
        self.align = align
        self.decisions: list[DecisionRecord] = []

    def plan(self, obs: Observation) -> Trajectory:
        record = self.provider.decide(obs)
        self.decisions.append(record)
        result = lookup(self.library, record.action)
        prior = align_prior(result.trajectory, obs.ego) if self.align else result.trajectory
        return advance_prior(prior)


class StraightLinePlanner:
    """Constant-speed forward line in the ego frame (collision-test baseline)."""

    def __init__(self, horizon: int = 16, dt: float = 0.5):
        self.horizon = horizon
        self.dt = dt

    def plan(self, obs: Observation) -> Trajectory:
        steps = np.arange(1, self.horizon + 1)
        pts = np.column_stack([steps * obs.ego.speed * self.dt, np.zeros(self.horizon)])
        return Trajectory(pts, self.dt)


class ExpertReplayPlanner:
    """Replays the scripted log trajectory; plans are the log's future
    relative to the current replanning time, expressed in the live ego frame."""

    def __init__(self, log: DriveLog, replan_hz: float = 2.0,
                 horizon: int = 16):
        self.log = log
        self.replan_hz = replan_hz
        self.horizon = horizon
        self.calls = 0
        self._positions = log.ego_positions()
        self._times = np.arange(len(log.frames)) * log.dt

    def observe_log(self, log: DriveLog) -> None:
        self.__init__(log, self.replan_hz, self.horizon)

    def _position_at(self, t: float) -> np.ndarray:
        t = min(max(t, 0.0), float(self._times[-1]))
        x = np.interp(t, self._times, self._positions[:, 0])
        y = np.interp(t, self._times, self._positions[:, 1])
        return np.array([x, y])

    def plan(self, obs: Observation) -> Trajectory:
        t_now = self.calls / self.replan_hz
        self.calls += 1
        pts = np.array([self._position_at(t_now + (k + 1) * self.log.dt)
                        for k in range(self.horizon)])
        return to_ego_frame(Trajectory(pts, self.log.dt), obs.ego)


class OraclePlanner:
    """Returns the ground-truth future of the log it last observed."""

    def __init__(self, horizon: int = 16):
        self.horizon = horizon
        self._gt: Trajectory | None = None

    def observe_log(self, log: DriveLog) -> None:
        _, self._gt = ground_truth_future(log, self.horizon)

    def plan(self, obs: Observation) -> Trajectory:
        if self._gt is None:
            raise RuntimeError("OraclePlanner.plan called before observe_log")
        return self._gt


def training_samples_from_logs(logs: list[DriveLog], horizon: int = 16,
                               provider=None) -> TrainingSet:
    """Build (x0, s, ctx) triples from the 2 s / 8 s split of each log.

    The clean pose trajectory is the ego's future in the split-frame ego
    frame (positions plus rotated unit heading vectors). The context's
    meta-action slot comes from the same decision provider the planner will
    use at inference, so the conditioning distribution matches between
    training and planning.
    """
    if provider is None:
        provider = HeuristicProvider()
    x0s, states, ctxs = [], [], []
    for log in logs:
        n_hist = history_frame_count(log.dt)
        if len(log.frames) < n_hist + horizon:
            continue
        anchor = log.frames[n_hist - 1].ego
        future = log.frames[n_hist:n_hist + horizon]
        pts = np.array([[f.ego.x, f.ego.y] for f in future])
        local = points_to_ego_frame(pts, anchor)
        rel_heading = np.array([wrap_angle(f.ego.heading - anchor.heading) for f in future])
        x0 = np.column_stack([local, np.cos(rel_heading), np.sin(rel_heading)])
        obs = observation_at(log, n_hist - 1)
        action = provider.decide(obs).action
        x0s.append(x0)
        states.append(_EGO_FRAME_STATE)
        ctxs.append(build_context(obs, action))
    if not x0s:
        raise ValueError("no log long enough to produce a training sample")
    return TrainingSet(x0=np.stack(x0s), s=np.stack(states), ctx=np.stack(ctxs))
