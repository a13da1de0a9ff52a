"""Scene observation types shared by the decision module and the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .trajectory import EgoState

AGENT_KINDS = ("vehicle", "pedestrian", "cyclist")
SIGNAL_STATES = ("red", "yellow", "green")


@dataclass(frozen=True)
class AgentState:
    """One surrounding traffic participant in the global frame."""

    kind: str
    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.speed < 0.0:
            raise ValueError("agent speed must be >= 0")


@dataclass(frozen=True)
class Lane:
    """Lane centerline polyline with graph connectivity."""

    lane_id: int
    points: np.ndarray  # (N, 2)
    successors: tuple[int, ...] = ()
    is_on_route: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError(f"lane polyline must be (N>=2, 2), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "successors", tuple(int(s) for s in self.successors))


@dataclass(frozen=True)
class SignalState:
    """A traffic signal's controlled lane, state, and stop-line position."""

    lane_id: int
    state: str
    x: float
    y: float

    def __post_init__(self):
        if self.state not in SIGNAL_STATES:
            raise ValueError(f"unknown signal state {self.state!r}")


@dataclass(frozen=True)
class SignalObservation:
    """Signal as seen from the ego: forward distance to the stop line."""

    lane_id: int
    state: str
    distance_m: float

    def __post_init__(self):
        if self.state not in SIGNAL_STATES:
            raise ValueError(f"unknown signal state {self.state!r}")
        if self.distance_m < 0.0:
            raise ValueError("signal distance must be >= 0")


@dataclass(frozen=True)
class Observation:
    """Structured scene snapshot consumed by decision providers and planners."""

    ego: EgoState
    agents: tuple[AgentState, ...] = ()
    lanes: tuple[Lane, ...] = ()
    signals: tuple[SignalObservation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "signals", tuple(self.signals))
        lane_ids = {lane.lane_id for lane in self.lanes}
        for lane in self.lanes:
            for succ in lane.successors:
                if succ not in lane_ids:
                    raise ValueError(f"lane {lane.lane_id} references unknown successor {succ}")
        for sig in self.signals:
            if sig.lane_id not in lane_ids:
                raise ValueError(f"signal references unknown lane {sig.lane_id}")

    def route_lanes(self) -> tuple[Lane, ...]:
        return tuple(lane for lane in self.lanes if lane.is_on_route)


def agent_in_ego_frame(agent: AgentState, ego: EgoState) -> tuple[float, float]:
    """(longitudinal, lateral) offset of an agent in the ego frame."""
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    dx, dy = agent.x - ego.x, agent.y - ego.y
    return c * dx + s * dy, -s * dx + c * dy


def route_polyline(observation: Observation) -> np.ndarray | None:
    """Ordered route centerline: on-route lanes chained by successor links.

    Starts from the on-route lane with no on-route predecessor (falls back to
    the lane nearest the ego) and follows successor links among route lanes.
    Returns (N, 2) points or None when the route is empty.
    """
    route = {lane.lane_id: lane for lane in observation.route_lanes()}
    if not route:
        return None
    has_pred = set()
    for lane in route.values():
        for succ in lane.successors:
            if succ in route:
                has_pred.add(succ)
    starts = [lid for lid in route if lid not in has_pred]
    if starts:
        start_id = min(starts)
    else:
        ego_pos = np.array([observation.ego.x, observation.ego.y])
        start_id = min(route, key=lambda lid: float(
            np.min(np.linalg.norm(route[lid].points - ego_pos, axis=1))))
    chunks = []
    seen = set()
    lane_id = start_id
    while lane_id in route and lane_id not in seen:
        seen.add(lane_id)
        pts = route[lane_id].points
        if chunks and np.allclose(chunks[-1][-1], pts[0]):
            pts = pts[1:]
        chunks.append(pts)
        nxt = [s for s in route[lane_id].successors if s in route]
        lane_id = nxt[0] if nxt else -1
    return np.vstack(chunks)
