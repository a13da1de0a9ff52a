"""Synthetic drive-log generation: scripted kinematic-bicycle episodes.

Each episode is 10 s at dt = 0.5 s (20 frames). A scenario kind fixes the
route geometry (straight, turns, U-turn, lane changes, red-light stop) and a
cycled speed profile (accelerate / cruise / decelerate / brake) fixes the
longitudinal script, so the family covers the full meta-action label space.
Maneuvers are timed to start just after the 2 s history prefix, which keeps
the 8 s suffix of every log classifiable to the intended label.

Recorded waypoints carry bounded observation noise (sigma 0.05 m, clipped at
3 sigma); a stopped vehicle's recorded position is frozen so stationary
tails stay exactly stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .scene import AgentState, Lane, Observation, SignalObservation, SignalState
from .trajectory import EgoState, Trajectory, to_ego_frame, wrap_angle
from .geometry import cumulative_arclength, point_at_arclength, tangent_at_arclength
from .vehicle import BicycleState, WHEELBASE_M, pure_pursuit_steer
from .formats import MAGIC_LOG, dump_json_payload, read_envelope, write_envelope

import json

LOG_DURATION_S = 10.0
LOG_DT = 0.5
HISTORY_S = 2.0
FUTURE_S = 8.0

WAYPOINT_NOISE_STD = 0.05
WAYPOINT_NOISE_CLIP = 0.15
_NOISE_AR_COEFF = 0.9
# Below this speed the recorded position is frozen at its last value, so
# stationary tails have exactly zero-length chords and crawl-speed chords
# never produce garbage headings.
_NOISE_FREEZE_SPEED = 1.5

ALL_KINDS = ("straight", "left_turn", "right_turn", "u_turn",
             "lane_change_left", "lane_change_right", "red_light")

_PROFILES = {
    "straight": ("cruise", "accelerate", "decelerate"),
    "left_turn": ("cruise", "decelerate", "accelerate"),
    "right_turn": ("cruise", "decelerate", "accelerate"),
    "u_turn": ("decelerate", "cruise"),
    "lane_change_left": ("cruise", "accelerate", "decelerate"),
    "lane_change_right": ("cruise", "accelerate", "decelerate"),
    "red_light": ("brake",),
}

# Straight-kind decelerations are caused by a slow lead vehicle directly
# ahead, so the intent is observable; braking is always caused by a red
# signal (the red_light kind owns the Brake regime).

_SIM_DT = 0.1
_PATH_STEP = 0.5


@dataclass(frozen=True)
class LogFrame:
    ego: EgoState
    agents: tuple[AgentState, ...] = ()
    signals: tuple[SignalState, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "signals", tuple(self.signals))


@dataclass(frozen=True)
class DriveLog:
    dt: float
    frames: tuple[LogFrame, ...]
    lanes: tuple[Lane, ...]
    kind: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "lanes", tuple(self.lanes))
        if len(self.frames) < 2:
            raise ValueError("drive log needs >= 2 frames")
        if self.dt <= 0:
            raise ValueError("drive log dt must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.frames) * self.dt

    def ego_positions(self) -> np.ndarray:
        return np.array([[f.ego.x, f.ego.y] for f in self.frames])


def history_frame_count(dt: float = LOG_DT, history_s: float = HISTORY_S) -> int:
    return int(round(history_s / dt))


def observation_at(log: DriveLog, frame_idx: int) -> Observation:
    """Observation snapshot at one log frame; signal distances are the
    forward offsets from that frame's ego."""
    frame = log.frames[frame_idx]
    ego = frame.ego
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    signals = []
    for sig in frame.signals:
        lon = c * (sig.x - ego.x) + s * (sig.y - ego.y)
        if lon >= -2.0:
            signals.append(SignalObservation(sig.lane_id, sig.state, max(0.0, lon)))
    return Observation(ego=ego, agents=frame.agents, lanes=log.lanes,
                       signals=tuple(signals))


def suffix_segment(log: DriveLog, horizon: int = 16) -> Trajectory:
    """Ego-frame trajectory of the last `horizon` frames (the 8 s suffix for
    the standard 10 s / 0.5 s log)."""
    frames = log.frames[-horizon:]
    pts = np.array([[f.ego.x, f.ego.y] for f in frames])
    return to_ego_frame(Trajectory(pts, log.dt), frames[0].ego)


# --- path construction -----------------------------------------------------

def _path_from_segments(segments) -> np.ndarray:
    """Sample a (line/arc)* chain into a polyline with ~0.5 m spacing."""
    pts = [np.zeros(2)]
    heading = 0.0
    for seg in segments:
        if seg[0] == "line":
            length = seg[1]
            n = max(1, int(round(length / _PATH_STEP)))
            d = np.array([math.cos(heading), math.sin(heading)])
            step = length / n
            for _ in range(n):
                pts.append(pts[-1] + d * step)
        elif seg[0] == "arc":
            radius, angle = seg[1], seg[2]
            arc_len = abs(angle) * radius
            n = max(2, int(round(arc_len / _PATH_STEP)))
            dphi = angle / n
            for _ in range(n):
                heading_mid = heading + 0.5 * dphi
                step = 2.0 * radius * math.sin(abs(dphi) / 2.0)
                pts.append(pts[-1] + step * np.array([math.cos(heading_mid),
                                                      math.sin(heading_mid)]))
                heading += dphi
        else:
            raise ValueError(f"unknown path segment {seg[0]!r}")
    return np.array(pts)


def _lane_change_path(d0: float, ramp_len: float, offset: float,
                      tail: float = 150.0) -> np.ndarray:
    xs = np.arange(0.0, d0 + ramp_len + tail, _PATH_STEP)
    ys = np.zeros_like(xs)
    in_ramp = (xs > d0) & (xs < d0 + ramp_len)
    ys[in_ramp] = offset * 0.5 * (1.0 - np.cos(math.pi * (xs[in_ramp] - d0) / ramp_len))
    ys[xs >= d0 + ramp_len] = offset
    return np.column_stack([xs, ys])


# --- speed scripts ----------------------------------------------------------

def _cruise(v0):
    return lambda t: v0


def _linear(v0, accel, floor=0.0, cap=math.inf):
    return lambda t: min(cap, max(floor, v0 + accel * t))


def _brake(v0, hold_s, decel):
    return lambda t: v0 if t < hold_s else max(0.0, v0 + decel * (t - hold_s))


def _distance_at(v_of_t, t_target, dt=0.01) -> float:
    steps = int(round(t_target / dt))
    return sum(v_of_t(k * dt) * dt for k in range(steps))


def _observed_positions(states, rng: np.random.Generator) -> np.ndarray:
    """Recorded ego positions: truth plus bounded AR(1) observation noise.

    The AR(1) structure keeps consecutive offsets close (stationary std about
    WAYPOINT_NOISE_STD) so chord headings stay meaningful at low speed; below
    the freeze speed the previous recorded position is reused verbatim.
    """
    n = len(states)
    innovation_std = WAYPOINT_NOISE_STD * math.sqrt(1.0 - _NOISE_AR_COEFF ** 2)
    innovations = rng.normal(0.0, innovation_std, (n, 2))
    noise = np.zeros((n, 2))
    noise[0] = np.clip(rng.normal(0.0, WAYPOINT_NOISE_STD, 2),
                       -WAYPOINT_NOISE_CLIP, WAYPOINT_NOISE_CLIP)
    for i in range(1, n):
        noise[i] = np.clip(_NOISE_AR_COEFF * noise[i - 1] + innovations[i],
                           -WAYPOINT_NOISE_CLIP, WAYPOINT_NOISE_CLIP)
    out = np.empty((n, 2))
    for i, (x, y, _, speed) in enumerate(states):
        if speed < _NOISE_FREEZE_SPEED and i > 0:
            out[i] = out[i - 1]
        else:
            out[i] = (x + noise[i, 0], y + noise[i, 1])
    return out


def _script_for(kind: str, profile: str, rng: np.random.Generator):
    """(v_of_t, maneuver_start_s) for one episode."""
    if kind.startswith("lane_change"):
        # late start: pure-pursuit anticipation must not tilt the first
        # suffix chord, which anchors the lateral-offset feature
        start_s = float(rng.uniform(3.4, 3.8))
    else:
        start_s = float(rng.uniform(2.6, 3.0))
    if profile == "cruise":
        v0 = float(rng.uniform(*{"straight": (6.0, 14.0), "u_turn": (5.0, 7.0)}.get(
            kind, (7.0, 11.0))))
        return _cruise(v0), start_s
    if profile == "accelerate":
        v0 = float(rng.uniform(4.5, 6.0))
        accel = float(rng.uniform(0.8, 1.2))
        return _linear(v0, accel, cap=16.0), start_s
    if profile == "decelerate":
        if kind == "u_turn":
            v0 = float(rng.uniform(8.0, 10.0))
            return _linear(v0, -1.0, floor=3.5), start_s
        v0 = float(rng.uniform(10.0, 14.0))
        accel = float(rng.uniform(-1.1, -0.7))
        return _linear(v0, accel, floor=2.8), start_s
    if profile == "brake":
        # braking starts just before the 2 s decision point so the signal is
        # inside the stopping-distance rule's range when the planner looks
        v0 = float(rng.uniform(8.0, 11.0))
        hold = float(rng.uniform(1.1, 1.4))
        decel = float(rng.uniform(-2.9, -2.5))
        return _brake(v0, hold, decel), start_s
    raise ConfigError(f"unknown speed profile {profile!r}")


def _geometry_for(kind: str, v_of_t, start_s: float, rng: np.random.Generator):
    """(path polyline, signal stop arc or None) in the local frame."""
    d0 = max(4.0, _distance_at(v_of_t, start_s))
    if kind in ("straight", "red_light"):
        path = _path_from_segments([("line", 220.0)])
        if kind == "red_light":
            stop_arc = _distance_at(v_of_t, LOG_DURATION_S) + 2.0
            return path, stop_arc
        return path, None
    if kind in ("left_turn", "right_turn"):
        radius = float(rng.uniform(10.0, 16.0))
        sign = 1.0 if kind == "left_turn" else -1.0
        path = _path_from_segments([
            ("line", d0), ("arc", radius, sign * math.pi / 2.0), ("line", 150.0)])
        return path, None
    if kind == "u_turn":
        radius = float(rng.uniform(6.0, 8.0))
        path = _path_from_segments([
            ("line", d0), ("arc", radius, math.pi), ("line", 100.0)])
        return path, None
    if kind in ("lane_change_left", "lane_change_right"):
        ramp_end = _distance_at(v_of_t, 8.2)
        ramp_len = max(20.0, ramp_end - d0)
        offset = 3.0 if kind == "lane_change_left" else -3.0
        return _lane_change_path(d0, ramp_len, offset), None
    raise ConfigError(f"unknown scenario kind {kind!r}")


def _route_lanes(path: np.ndarray, kind: str) -> list[Lane]:
    """Split the path into two chained on-route lanes; lane changes also get
    the off-route origin lane."""
    mid = len(path) // 2
    lanes = [
        Lane(lane_id=0, points=path[:mid + 1], successors=(1,), is_on_route=True),
        Lane(lane_id=1, points=path[mid:], successors=(), is_on_route=True),
    ]
    if kind.startswith("lane_change"):
        xs = np.arange(0.0, cumulative_arclength(path)[-1], 2.0)
        origin = np.column_stack([xs, np.zeros_like(xs)])
        lanes.append(Lane(lane_id=10, points=origin, successors=(), is_on_route=False))
    return lanes


def _simulate_ego(path: np.ndarray, v_of_t, n_frames: int):
    """Track the path with pure-pursuit steering at scripted speed; returns
    per-frame (x, y, heading, speed) plus per-frame traveled arc."""
    record_every = int(round(LOG_DT / _SIM_DT))
    heading0 = tangent_at_arclength(path, 0.0)
    state = BicycleState(path[0, 0], path[0, 1], heading0, v_of_t(0.0))
    states = []
    arcs = []
    arc = 0.0
    for k in range(n_frames * record_every):
        if k % record_every == 0:
            states.append((state.x, state.y, state.heading, state.speed))
            arcs.append(arc)
        steer = pure_pursuit_steer(state, path)
        v = state.speed
        nx = state.x + v * math.cos(state.heading) * _SIM_DT
        ny = state.y + v * math.sin(state.heading) * _SIM_DT
        nh = state.heading + v / WHEELBASE_M * math.tan(steer) * _SIM_DT
        arc += v * _SIM_DT
        state = BicycleState(nx, ny, nh, v_of_t((k + 1) * _SIM_DT))
    return states, arcs


def _transform(pose, x, y, heading=None):
    """Apply the episode's global pose (rotation phi, translation tx, ty)."""
    phi, tx, ty = pose
    c, s = math.cos(phi), math.sin(phi)
    gx = c * x - s * y + tx
    gy = s * x + c * y + ty
    if heading is None:
        return gx, gy
    return gx, gy, wrap_angle(heading + phi)


def _transform_points(pose, pts: np.ndarray) -> np.ndarray:
    phi, tx, ty = pose
    c, s = math.cos(phi), math.sin(phi)
    return np.column_stack([c * pts[:, 0] - s * pts[:, 1] + tx,
                            s * pts[:, 0] + c * pts[:, 1] + ty])


def _generate_one(kind: str, profile: str, seed_seq: np.random.SeedSequence,
                  scenario_seed: int) -> DriveLog:
    rng = np.random.default_rng(seed_seq)
    v_of_t, start_s = _script_for(kind, profile, rng)
    path, stop_arc = _geometry_for(kind, v_of_t, start_s, rng)
    n_frames = int(round(LOG_DURATION_S / LOG_DT))
    states, arcs = _simulate_ego(path, v_of_t, n_frames)

    pose = (float(rng.uniform(-math.pi, math.pi)),
            float(rng.uniform(-50.0, 50.0)), float(rng.uniform(-50.0, 50.0)))
    lanes = [
        Lane(lane.lane_id, _transform_points(pose, lane.points),
             lane.successors, lane.is_on_route)
        for lane in _route_lanes(path, kind)
    ]

    observed = _observed_positions(states, rng)

    # background agents: a slow lead CAUSES straight decelerations; other
    # kinds get a faster lead that never interacts
    v_max = max(v_of_t(k * 0.1) for k in range(101))
    lead = None
    if kind == "straight" and profile == "decelerate":
        lead = ("slow", float(rng.uniform(13.0, 14.5)), 0.0)
    elif kind not in ("red_light", "u_turn"):
        lead = ("far", float(rng.uniform(40.0, 60.0)), v_max + 1.0)
    trailer_gap = float(rng.uniform(22.0, 32.0)) if rng.uniform() < 0.5 else None
    pedestrian = None
    if rng.uniform() < 0.5:
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        pedestrian = (float(rng.uniform(20.0, 60.0)), side * float(rng.uniform(6.0, 10.0)))

    signals_local = []
    if stop_arc is not None:
        sx, sy = point_at_arclength(path, stop_arc)
        signals_local.append((1, "red", float(sx), float(sy)))

    frames = []
    for i in range(n_frames):
        _, _, heading, speed = states[i]
        gx, gy, gh = _transform(pose, observed[i, 0], observed[i, 1], heading)
        ego = EgoState(gx, gy, gh, speed)

        t = i * LOG_DT
        agents = []
        if lead is not None:
            mode, param, v_far = lead
            if mode == "slow":
                s_lead = arcs[i] + max(6.0, param - 0.5 * t)
                v_lead = max(0.0, speed - 0.5)
            else:
                s_lead = param + v_far * t
                v_lead = v_far
            lx, ly = point_at_arclength(path, s_lead)
            lh = tangent_at_arclength(path, s_lead)
            ax, ay, ah = _transform(pose, float(lx), float(ly), lh)
            agents.append(AgentState("vehicle", ax, ay, ah, v_lead))
        if trailer_gap is not None:
            s_t = max(0.0, arcs[i] - trailer_gap)
            txp, typ = point_at_arclength(path, s_t)
            th = tangent_at_arclength(path, s_t)
            ax, ay, ah = _transform(pose, float(txp), float(typ), th)
            agents.append(AgentState("vehicle", ax, ay, ah, speed))
        if pedestrian is not None:
            s_p, lat = pedestrian
            px, py = point_at_arclength(path, s_p)
            ph = tangent_at_arclength(path, s_p)
            px += -math.sin(ph) * lat
            py += math.cos(ph) * lat
            ax, ay, _ = _transform(pose, float(px), float(py), 0.0)
            agents.append(AgentState("pedestrian", ax, ay, 0.0, 0.0))

        sigs = []
        for lane_id, state_name, sx, sy in signals_local:
            gx2, gy2 = _transform(pose, sx, sy)
            sigs.append(SignalState(lane_id, state_name, gx2, gy2))
        frames.append(LogFrame(ego=ego, agents=tuple(agents), signals=tuple(sigs)))

    return DriveLog(dt=LOG_DT, frames=tuple(frames), lanes=tuple(lanes),
                    kind=kind, seed=scenario_seed)


def generate_scenarios(count: int, seed: int, kinds=None) -> list[DriveLog]:
    """Deterministically generate `count` scripted episodes cycling over
    `kinds` (default: all) and each kind's speed profiles."""
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    kinds = tuple(kinds) if kinds else ALL_KINDS
    for kind in kinds:
        if kind not in ALL_KINDS:
            raise ConfigError(f"unknown scenario kind {kind!r}; known: {ALL_KINDS}")
    children = np.random.SeedSequence(seed).spawn(count)
    profile_counters = {kind: 0 for kind in kinds}
    logs = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        profiles = _PROFILES[kind]
        profile = profiles[profile_counters[kind] % len(profiles)]
        profile_counters[kind] += 1
        logs.append(_generate_one(kind, profile, children[i], scenario_seed=i))
    return logs


def stopped_lead_scene(seed: int = 0) -> DriveLog:
    """Straight route with a parked vehicle 30 m ahead; the scripted ego
    brakes and stops well short of it."""
    rng = np.random.default_rng(seed)
    path = _path_from_segments([("line", 200.0)])
    v_of_t = _brake(10.0, 0.5, -3.0)
    n_frames = int(round(LOG_DURATION_S / LOG_DT))
    states, _ = _simulate_ego(path, v_of_t, n_frames)
    lanes = [Lane(0, path, (), True)]
    observed = _observed_positions(states, rng)
    frames = []
    for i in range(n_frames):
        _, _, heading, speed = states[i]
        agents = (AgentState("vehicle", 30.0, 0.0, 0.0, 0.0),)
        frames.append(LogFrame(ego=EgoState(observed[i, 0], observed[i, 1],
                                            heading, speed), agents=agents))
    return DriveLog(dt=LOG_DT, frames=tuple(frames), lanes=tuple(lanes),
                    kind="stopped_lead", seed=seed)


# --- serialization ----------------------------------------------------------

def _log_to_dict(log: DriveLog) -> dict:
    return {
        "dt": log.dt,
        "kind": log.kind,
        "seed": log.seed,
        "lanes": [
            {"id": lane.lane_id, "points": lane.points.tolist(),
             "successors": list(lane.successors), "on_route": lane.is_on_route}
            for lane in log.lanes
        ],
        "frames": [
            {
                "ego": [f.ego.x, f.ego.y, f.ego.heading, f.ego.speed],
                "agents": [[a.kind, a.x, a.y, a.heading, a.speed] for a in f.agents],
                "signals": [[s.lane_id, s.state, s.x, s.y] for s in f.signals],
            }
            for f in log.frames
        ],
    }


def _log_from_dict(doc: dict) -> DriveLog:
    lanes = tuple(
        Lane(int(d["id"]), np.array(d["points"]), tuple(d["successors"]), bool(d["on_route"]))
        for d in doc["lanes"]
    )
    frames = tuple(
        LogFrame(
            ego=EgoState(*f["ego"]),
            agents=tuple(AgentState(a[0], a[1], a[2], a[3], a[4]) for a in f["agents"]),
            signals=tuple(SignalState(int(s[0]), s[1], s[2], s[3]) for s in f["signals"]),
        )
        for f in doc["frames"]
    )
    return DriveLog(dt=float(doc["dt"]), frames=frames, lanes=lanes,
                    kind=str(doc["kind"]), seed=int(doc["seed"]))


def save_drive_log(log: DriveLog, path) -> None:
    write_envelope(path, MAGIC_LOG, dump_json_payload(_log_to_dict(log)))


def load_drive_log(path) -> DriveLog:
    return _log_from_dict(json.loads(read_envelope(path, MAGIC_LOG).decode("utf-8")))
