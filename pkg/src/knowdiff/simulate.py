"""Closed-loop rollout: replan at a fixed rate, track the plan with pure
pursuit plus proportional speed control on a kinematic bicycle, advance
surrounding agents (log replay or reactive car-following), and score the
episode.

Scoring is a fixed composite: a collision gates the score to zero, any
drivable-area violation halves it, and the remainder rewards route progress
and comfort. The weights are versioned so numbers are comparable across runs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import cumulative_arclength, point_at_arclength, project_to_polyline
from .scene import AgentState, Observation, SignalObservation, route_polyline
from .scenarios import DriveLog
from .trajectory import EgoState, from_ego_frame, wrap_angle
from .vehicle import (ACCEL_MAX, ACCEL_MIN, BicycleState, WHEELBASE_M, bicycle_step,
                      pure_pursuit_steer)

logger = logging.getLogger(__name__)

SCORE_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    replan_hz: float = 2.0
    reactive: bool = False
    horizon_s: float | None = None     # default: full scenario duration
    sim_dt: float = 0.1
    collision_radius: float = 1.2
    lane_half_width: float = 1.75
    comfort_accel: float = 3.0
    comfort_jerk: float = 5.0
    speed_gain: float = 1.5
    accel_rate_limit: float = 4.5      # m/s^3; keeps commanded jerk under the gate


@dataclass(frozen=True)
class ClosedLoopReport:
    score: float
    collisions: int
    drivable_violations: int
    progress_ratio: float
    comfort_violations: int
    comfort_ok_fraction: float
    reactive: bool
    kind: str = ""
    seed: int = 0
    failure: str = ""

    def to_dict(self) -> dict:
        return {
            "score": self.score, "collisions": self.collisions,
            "drivable_violations": self.drivable_violations,
            "progress_ratio": self.progress_ratio,
            "comfort_violations": self.comfort_violations,
            "comfort_ok_fraction": self.comfort_ok_fraction,
            "reactive": self.reactive, "kind": self.kind, "seed": self.seed,
            "failure": self.failure, "score_version": SCORE_VERSION,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClosedLoopReport":
        return cls(score=doc["score"], collisions=doc["collisions"],
                   drivable_violations=doc["drivable_violations"],
                   progress_ratio=doc["progress_ratio"],
                   comfort_violations=doc["comfort_violations"],
                   comfort_ok_fraction=doc["comfort_ok_fraction"],
                   reactive=doc["reactive"], kind=doc.get("kind", ""),
                   seed=doc.get("seed", 0), failure=doc.get("failure", ""))


def composite_score(collided: bool, progress: float, comfort_ok: float,
                    drivable_violated: bool) -> float:
    gate = 0.0 if collided else 1.0
    mult = 0.5 if drivable_violated else 1.0
    return 100.0 * gate * (0.5 + 0.3 * progress + 0.2 * comfort_ok) * mult


def _route_points(log: DriveLog) -> np.ndarray | None:
    if not any(lane.is_on_route for lane in log.lanes):
        return None
    obs_like = Observation(ego=log.frames[0].ego, agents=(), lanes=log.lanes, signals=())
    return route_polyline(obs_like)


class _ReplayAgents:
    """Non-reactive agents: linear interpolation of the logged states."""

    def __init__(self, log: DriveLog):
        self.log = log
        self.times = np.arange(len(log.frames)) * log.dt
        n_agents = min(len(f.agents) for f in log.frames) if log.frames else 0
        self.n_agents = n_agents

    def states_at(self, t: float) -> list[AgentState]:
        t = min(max(t, 0.0), float(self.times[-1]))
        i = min(int(t / self.log.dt), len(self.times) - 2)
        frac = (t - self.times[i]) / self.log.dt
        out = []
        for k in range(self.n_agents):
            a0 = self.log.frames[i].agents[k]
            a1 = self.log.frames[i + 1].agents[k]
            heading = wrap_angle(a0.heading + frac * wrap_angle(a1.heading - a0.heading))
            out.append(AgentState(
                a0.kind,
                a0.x + frac * (a1.x - a0.x),
                a0.y + frac * (a1.y - a0.y),
                heading,
                a0.speed + frac * (a1.speed - a0.speed),
            ))
        return out

    def step(self, t: float, ego: BicycleState, dt: float) -> list[AgentState]:
        return self.states_at(t)


# Intelligent-driver car-following parameters for reactive vehicles.
_IDM_ACCEL = 1.5
_IDM_BRAKE = 2.0
_IDM_MIN_GAP = 2.0
_IDM_HEADWAY = 1.5
_IDM_DELTA = 4
_AGENT_LENGTH = 4.0


class _ReactiveAgents:
    """Vehicles follow their logged geometry with intelligent-driver speed
    control against whatever is ahead on their path (ego included);
    non-vehicles replay the log."""

    def __init__(self, log: DriveLog):
        self.replay = _ReplayAgents(log)
        self.vehicles = []
        for k in range(self.replay.n_agents):
            first = log.frames[0].agents[k]
            if first.kind != "vehicle":
                self.vehicles.append(None)
                continue
            pts = np.array([[f.agents[k].x, f.agents[k].y] for f in log.frames])
            moved = float(np.linalg.norm(pts[-1] - pts[0]))
            if moved < 1.0:
                self.vehicles.append(None)  # parked vehicle stays parked
                continue
            d = pts[-1] - pts[-2]
            norm = float(np.hypot(*d))
            if norm > 1e-9:
                pts = np.vstack([pts, pts[-1] + d / norm * 300.0])
            self.vehicles.append({
                "path": pts,
                "s": 0.0,
                "v": first.speed,
                "v_desired": max(1.0, max(f.agents[k].speed for f in log.frames)),
            })
        self.current = self.replay.states_at(0.0)

    def step(self, t: float, ego: BicycleState, dt: float) -> list[AgentState]:
        replayed = self.replay.states_at(t)
        out = []
        for k, veh in enumerate(self.vehicles):
            if veh is None:
                out.append(replayed[k])
                continue
            lead_gap, lead_speed = self._lead_for(k, veh, ego)
            accel = self._idm_accel(veh["v"], veh["v_desired"], lead_gap, lead_speed)
            veh["v"] = max(0.0, veh["v"] + accel * dt)
            veh["s"] += veh["v"] * dt
            pos = point_at_arclength(veh["path"], veh["s"])
            nxt = point_at_arclength(veh["path"], veh["s"] + 1.0)
            heading = math.atan2(nxt[1] - pos[1], nxt[0] - pos[0])
            out.append(AgentState("vehicle", float(pos[0]), float(pos[1]),
                                  heading, veh["v"]))
        self.current = out
        return out

    def _lead_for(self, k: int, veh: dict, ego: BicycleState):
        best_gap, best_speed = math.inf, 0.0
        candidates = [(ego.x, ego.y, ego.speed)]
        for j, other in enumerate(self.current):
            if j != k:
                candidates.append((other.x, other.y, other.speed))
        for cx, cy, cv in candidates:
            s_c, lat = project_to_polyline(veh["path"], (cx, cy))
            if abs(lat) > 2.5:
                continue
            gap = s_c - veh["s"] - _AGENT_LENGTH
            if 0.0 < gap < best_gap:
                best_gap, best_speed = gap, cv
        return best_gap, best_speed

    @staticmethod
    def _idm_accel(v: float, v_desired: float, gap: float, lead_speed: float) -> float:
        free = 1.0 - (v / max(v_desired, 0.1)) ** _IDM_DELTA
        if math.isinf(gap):
            accel = _IDM_ACCEL * free
        else:
            dv = v - lead_speed
            s_star = _IDM_MIN_GAP + v * _IDM_HEADWAY \
                + v * dv / (2.0 * math.sqrt(_IDM_ACCEL * _IDM_BRAKE))
            accel = _IDM_ACCEL * (free - (s_star / max(gap, 0.1)) ** 2)
        return min(ACCEL_MAX, max(ACCEL_MIN, accel))


def _signals_observed(log: DriveLog, t: float, ego: EgoState):
    idx = min(int(t / log.dt), len(log.frames) - 1)
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    out = []
    for sig in log.frames[idx].signals:
        lon = c * (sig.x - ego.x) + s * (sig.y - ego.y)
        if lon >= -2.0:
            out.append(SignalObservation(sig.lane_id, sig.state, max(0.0, lon)))
    return tuple(out)


def rollout_closed_loop(planner, scenario: DriveLog,
                        cfg: SimConfig = SimConfig()) -> tuple[ClosedLoopReport, dict]:
    """Simulate one scenario under a planner; returns (report, trace).

    The trace holds every simulation step (ego state, commands, agent
    positions) so collisions and comfort can be recomputed offline.
    """
    duration = cfg.horizon_s if cfg.horizon_s is not None else scenario.duration_s
    n_steps = int(round(duration / cfg.sim_dt))
    replan_every = max(1, int(round(1.0 / (cfg.replan_hz * cfg.sim_dt))))

    first = scenario.frames[0].ego
    ego = BicycleState(first.x, first.y, first.heading, first.speed)
    agents = _ReactiveAgents(scenario) if cfg.reactive else _ReplayAgents(scenario)

    route = _route_points(scenario)
    expert = scenario.ego_positions()
    if route is not None:
        s_start, _ = project_to_polyline(route, expert[0])
        s_expert_end, _ = project_to_polyline(route, expert[-1])
        expert_covered = max(s_expert_end - s_start, 0.0)
    else:
        s_start, expert_covered = 0.0, float(cumulative_arclength(expert)[-1])

    collisions = 0
    in_contact: set[int] = set()
    drivable_violations = 0
    comfort_violations = 0
    max_route_s = s_start
    accel_cmd = 0.0
    prev_accel = None
    failure = ""
    plan_path = None
    plan_speeds = None
    plan_knots = None
    plan_age = 0.0
    trace_frames = []
    agent_states = agents.step(0.0, ego, 0.0)

    for step in range(n_steps):
        t = step * cfg.sim_dt
        if step % replan_every == 0:
            ego_state = EgoState(ego.x, ego.y, ego.heading, ego.speed)
            obs = Observation(
                ego=ego_state,
                agents=tuple(agent_states),
                lanes=scenario.lanes,
                signals=_signals_observed(scenario, t, ego_state),
            )
            try:
                plan = planner.plan(obs)
            except Exception as exc:  # planner contract breach -> scenario scored 0
                failure = f"planner failed at t={t:.1f}s: {exc}"
                logger.warning("%s (kind=%s seed=%d)", failure, scenario.kind, scenario.seed)
                break
            plan_global = from_ego_frame(plan, ego_state)
            plan_path = np.vstack([[ego.x, ego.y], plan_global.points])
            chords = np.linalg.norm(np.diff(plan_path, axis=0), axis=1)
            plan_speeds = chords / plan.dt
            plan_knots = plan.dt * np.arange(1, len(plan_speeds) + 1)
            plan_age = 0.0

        target_speed = float(np.interp(plan_age + cfg.sim_dt, plan_knots, plan_speeds))
        raw_accel = cfg.speed_gain * (target_speed - ego.speed)
        raw_accel = min(ACCEL_MAX, max(ACCEL_MIN, raw_accel))
        max_delta = cfg.accel_rate_limit * cfg.sim_dt
        if prev_accel is None:
            accel_cmd = raw_accel
        else:
            accel_cmd = prev_accel + min(max_delta, max(-max_delta, raw_accel - prev_accel))
        steer = pure_pursuit_steer(ego, plan_path)

        jerk = 0.0 if prev_accel is None else (accel_cmd - prev_accel) / cfg.sim_dt
        if abs(accel_cmd) > cfg.comfort_accel or abs(jerk) > cfg.comfort_jerk:
            comfort_violations += 1
        prev_accel = accel_cmd

        ego = bicycle_step(ego, accel_cmd, steer, cfg.sim_dt)
        plan_age += cfg.sim_dt
        agent_states = agents.step(t + cfg.sim_dt, ego, cfg.sim_dt)

        contact_dist = 2.0 * cfg.collision_radius
        for k, agent in enumerate(agent_states):
            dist = math.hypot(agent.x - ego.x, agent.y - ego.y)
            if dist < contact_dist:
                if k not in in_contact:
                    collisions += 1
                    in_contact.add(k)
            else:
                in_contact.discard(k)

        if route is not None:
            s_now, lateral = project_to_polyline(route, (ego.x, ego.y))
            max_route_s = max(max_route_s, s_now)
            if abs(lateral) > cfg.lane_half_width:
                drivable_violations += 1

        trace_frames.append({
            "t": round(t + cfg.sim_dt, 6),
            "ego": [ego.x, ego.y, ego.heading, ego.speed],
            "accel": accel_cmd,
            "steer": steer,
            "agents": [[a.x, a.y, a.heading, a.speed] for a in agent_states],
        })

    if expert_covered > 1e-6:
        progress = min(1.0, max(0.0, (max_route_s - s_start) / expert_covered))
    else:
        progress = 1.0
    steps_done = max(1, len(trace_frames))
    comfort_ok = 1.0 - comfort_violations / steps_done
    if failure:
        score = 0.0
    else:
        score = composite_score(collisions > 0, progress, comfort_ok,
                                drivable_violations > 0)
    report = ClosedLoopReport(
        score=score, collisions=collisions, drivable_violations=drivable_violations,
        progress_ratio=progress, comfort_violations=comfort_violations,
        comfort_ok_fraction=comfort_ok, reactive=cfg.reactive,
        kind=scenario.kind, seed=scenario.seed, failure=failure,
    )
    trace = {
        "dt": cfg.sim_dt,
        "collision_radius": cfg.collision_radius,
        "frames": trace_frames,
    }
    return report, trace
