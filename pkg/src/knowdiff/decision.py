"""High-level decision making: prompt encoding, providers, collapse guard.

Two providers produce meta-actions from observations: a deterministic
heuristic (the offline default) and a remote chat-completion client that
falls back to the heuristic on any network, status, or parse failure, so a
decision is always produced.
"""

from __future__ import annotations

import logging
import math
import re
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .actions import ALL_LABELS, Direction, MetaAction, SpeedProfile
from .exceptions import ConfigError
from .geometry import project_to_polyline, tangent_at_arclength
from .scene import Observation, agent_in_ego_frame, route_polyline
from .trajectory import wrap_angle

logger = logging.getLogger(__name__)

API_KEY_ENV = "KNOWDIFF_API_KEY"
PROMPT_SCHEMA_TAG = "meta_action_v1"

# Heuristic rule constants.
COMFORT_DECEL = 3.0          # m/s^2 used in the stopping-distance rule
STOP_MARGIN_M = 5.0
LEAD_VEHICLE_RANGE_M = 15.0
LEAD_VEHICLE_LATERAL_M = 2.0
TURN_LOOKAHEAD_M = 30.0
TURN_MIN_DEG = 15.0
LANE_OFFSET_MIN_M = 2.0
LANE_OFFSET_MAX_M = 4.0
REFERENCE_SPEED_MPS = 10.0
ACCELERATE_BELOW_FRACTION = 0.7

_SYSTEM_PROMPT = (
    "You are the high-level decision module of an autonomous vehicle. "
    "Given a structured scene description, choose the single most appropriate "
    "driving meta-action. Reply with exactly one label wrapped in an "
    "<action>...</action> tag and nothing else."
)
_CORRECTIVE_PROMPT = (
    "Your previous reply was not a valid meta-action. Reply with exactly one "
    "label of the form <action>Direction|Speed</action>, chosen verbatim from "
    "the legal set listed above."
)

_ACTION_RE = re.compile(r"<action>(.*?)</action>", re.DOTALL)


@dataclass(frozen=True)
class Prompt:
    text: str
    schema_tag: str = PROMPT_SCHEMA_TAG

    def __post_init__(self):
        if not self.text:
            raise ValueError("prompt text must be non-empty")


@dataclass(frozen=True)
class DecisionRecord:
    action: MetaAction
    provider: str                 # "heuristic" | "remote"
    latency_ms: float
    raw_response: str = ""
    ego_speed: float = float("nan")


@dataclass(frozen=True)
class RemoteConfig:
    endpoint: str
    model: str
    timeout_s: float = 10.0
    max_retries: int = 2
    rate_limit_per_s: float | None = None
    api_key: str = ""

    def __post_init__(self):
        if not self.endpoint:
            raise ConfigError("remote endpoint URL is required")
        if not self.model:
            raise ConfigError("remote model name is required")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


def load_api_key(environ) -> str:
    key = environ.get(API_KEY_ENV, "")
    if not key:
        raise ConfigError(f"environment variable {API_KEY_ENV} is not set")
    return key


def encode_prompt(obs: Observation) -> Prompt:
    """Deterministic structured prompt with the four scene sections and the
    answer-grammar instruction enumerating every legal label."""
    ego = obs.ego
    lines = ["# Driving scene", "", "## Ego state"]
    lines.append(
        f"position ({ego.x:.1f}, {ego.y:.1f}) m; heading {math.degrees(ego.heading):.1f} deg; "
        f"speed {ego.speed:.1f} m/s")

    lines += ["", "## Surrounding agents (nearest first, max 8)"]
    ranked = sorted(obs.agents, key=lambda a: (math.hypot(a.x - ego.x, a.y - ego.y),
                                               a.kind, a.x, a.y))[:8]
    if not ranked:
        lines.append("none")
    for agent in ranked:
        lon, lat = agent_in_ego_frame(agent, ego)
        side = "left" if lat >= 0 else "right"
        lines.append(
            f"- {agent.kind}: {abs(lon):.1f} m {'ahead' if lon >= 0 else 'behind'}, "
            f"{abs(lat):.1f} m {side}, speed {agent.speed:.1f} m/s")

    lines += ["", "## Route and lanes"]
    route = route_polyline(obs)
    lines.append(f"{len(obs.lanes)} lanes mapped, {len(obs.route_lanes())} on route")
    if route is None:
        lines.append("no route available")
    else:
        bend = _route_bend_deg(route, ego, TURN_LOOKAHEAD_M)
        if abs(bend) > 1.0:
            side = "left" if bend > 0 else "right"
            lines.append(f"route bends {abs(bend):.0f} deg {side} within {TURN_LOOKAHEAD_M:.0f} m")
        else:
            lines.append(f"route is straight for the next {TURN_LOOKAHEAD_M:.0f} m")

    lines += ["", "## Traffic controls"]
    if not obs.signals:
        lines.append("none")
    for sig in sorted(obs.signals, key=lambda s: (s.distance_m, s.lane_id)):
        lines.append(f"- {sig.state} signal in {sig.distance_m:.0f} m (lane {sig.lane_id})")

    lines += [
        "",
        "## Instruction",
        "Choose the single best driving meta-action for the ego vehicle.",
        "Reply with exactly one label of the form <action>Direction|Speed</action>.",
        "Legal labels: " + ", ".join(ALL_LABELS),
    ]
    return Prompt(text="\n".join(lines))


def _route_bend_deg(route: np.ndarray, ego, lookahead_m: float) -> float:
    """Signed net tangent change of the route between the ego's projection
    and `lookahead_m` further along."""
    s_ego, _ = project_to_polyline(route, (ego.x, ego.y))
    theta_here = tangent_at_arclength(route, s_ego)
    theta_ahead = tangent_at_arclength(route, s_ego + lookahead_m)
    return math.degrees(wrap_angle(theta_ahead - theta_here))


def heuristic_decide(obs: Observation) -> MetaAction:
    """Deterministic priority rules standing in for a remote reasoner."""
    ego = obs.ego
    route_ids = {lane.lane_id for lane in obs.route_lanes()}

    stop_distance = ego.speed ** 2 / (2.0 * COMFORT_DECEL) + STOP_MARGIN_M
    for sig in obs.signals:
        if sig.state == "red" and sig.lane_id in route_ids and sig.distance_m <= stop_distance:
            return MetaAction(Direction.GO_STRAIGHT, SpeedProfile.BRAKE)

    for agent in obs.agents:
        if agent.kind != "vehicle":
            continue
        lon, lat = agent_in_ego_frame(agent, ego)
        if 0.0 < lon <= LEAD_VEHICLE_RANGE_M and abs(lat) <= LEAD_VEHICLE_LATERAL_M \
                and agent.speed < ego.speed:
            return MetaAction(Direction.GO_STRAIGHT, SpeedProfile.DECELERATE)

    route = route_polyline(obs)
    if route is not None:
        bend = _route_bend_deg(route, ego, TURN_LOOKAHEAD_M)
        if abs(bend) > TURN_MIN_DEG:
            direction = Direction.LEFT_TURN if bend > 0 else Direction.RIGHT_TURN
            return MetaAction(direction, SpeedProfile.DECELERATE)
        _, lateral = project_to_polyline(route, (ego.x, ego.y))
        if LANE_OFFSET_MIN_M < abs(lateral) < LANE_OFFSET_MAX_M:
            direction = (Direction.LANE_CHANGE_LEFT if lateral > 0
                         else Direction.LANE_CHANGE_RIGHT)
            return MetaAction(direction, SpeedProfile.CRUISE)

    if ego.speed < ACCELERATE_BELOW_FRACTION * REFERENCE_SPEED_MPS:
        return MetaAction(Direction.GO_STRAIGHT, SpeedProfile.ACCELERATE)
    return MetaAction(Direction.GO_STRAIGHT, SpeedProfile.CRUISE)


def parse_action_response(content: str) -> MetaAction:
    """Extract and validate the first <action>...</action> span."""
    match = _ACTION_RE.search(content)
    if match is None:
        raise ValueError("no <action>...</action> span in response")
    return MetaAction.from_label(match.group(1))


class TokenBucket:
    """Minimal thread-safe token bucket for request pacing."""

    def __init__(self, rate_per_s: float, capacity: float | None = None):
        self.rate = rate_per_s
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_s)
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


def remote_decide(prompt: Prompt, cfg: RemoteConfig, fallback: MetaAction,
                  ego_speed: float = float("nan"),
                  session: requests.Session | None = None,
                  bucket: TokenBucket | None = None) -> DecisionRecord:
    """Query a chat-completion endpoint for a meta-action.

    Any failure mode (timeout, non-2xx, unparseable content) is retried up to
    `cfg.max_retries` times, appending a corrective instruction after parse
    failures; exhaustion resolves to the fallback action with
    provider="heuristic". This function never raises for network-class errors.
    """
    if not cfg.api_key:
        raise ConfigError("remote_decide requires cfg.api_key (fail fast, no network call)")
    http = session if session is not None else requests
    messages = [
        {"role": "system", "content": _SYSTEM_PROMPT},
        {"role": "user", "content": prompt.text},
    ]
    headers = {
        "Authorization": f"Bearer {cfg.api_key}",
        "Content-Type": "application/json",
    }
    start = time.perf_counter()
    last_raw = ""
    for attempt in range(cfg.max_retries + 1):
        if bucket is not None:
            bucket.acquire()
        try:
            resp = http.post(
                cfg.endpoint,
                json={"model": cfg.model, "messages": messages, "temperature": 0},
                headers=headers,
                timeout=cfg.timeout_s,
            )
        except requests.RequestException as exc:
            logger.warning("remote decision attempt %d failed: %s", attempt + 1, exc)
            continue
        if resp.status_code != 200:
            logger.warning("remote decision attempt %d: HTTP %d", attempt + 1, resp.status_code)
            continue
        try:
            last_raw = resp.json()["choices"][0]["message"]["content"]
            action = parse_action_response(last_raw)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            logger.warning("remote decision attempt %d unparseable: %s", attempt + 1, exc)
            messages = messages + [{"role": "user", "content": _CORRECTIVE_PROMPT}]
            continue
        latency = (time.perf_counter() - start) * 1000.0
        return DecisionRecord(action=action, provider="remote", latency_ms=latency,
                              raw_response=last_raw, ego_speed=ego_speed)
    latency = (time.perf_counter() - start) * 1000.0
    logger.warning("remote decision exhausted %d attempts; using heuristic fallback",
                   cfg.max_retries + 1)
    return DecisionRecord(action=fallback, provider="heuristic", latency_ms=latency,
                          raw_response=last_raw, ego_speed=ego_speed)


def detect_collapse(history: list[DecisionRecord], window: int) -> bool:
    """True iff the last `window` decisions are identical while the observed
    ego speed varied by more than 2 m/s — identical output under changing input."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if len(history) < window:
        return False
    recent = history[-window:]
    if any(r.action != recent[0].action for r in recent):
        return False
    speeds = [r.ego_speed for r in recent]
    if any(math.isnan(s) for s in speeds):
        return False
    return (max(speeds) - min(speeds)) > 2.0


class HeuristicProvider:
    """Offline deterministic provider."""

    name = "heuristic"

    def decide(self, obs: Observation) -> DecisionRecord:
        start = time.perf_counter()
        action = heuristic_decide(obs)
        latency = (time.perf_counter() - start) * 1000.0
        return DecisionRecord(action=action, provider="heuristic", latency_ms=latency,
                              ego_speed=obs.ego.speed)


class RemoteProvider:
    """Chat-completion provider with heuristic fallback and optional pacing."""

    name = "remote"

    def __init__(self, cfg: RemoteConfig, session: requests.Session | None = None):
        if not cfg.api_key:
            raise ConfigError(f"remote provider needs an API key; set {API_KEY_ENV}")
        self.cfg = cfg
        self.session = session
        self.bucket = (TokenBucket(cfg.rate_limit_per_s)
                       if cfg.rate_limit_per_s else None)

    def decide(self, obs: Observation) -> DecisionRecord:
        prompt = encode_prompt(obs)
        fallback = heuristic_decide(obs)
        return remote_decide(prompt, self.cfg, fallback, ego_speed=obs.ego.speed,
                             session=self.session, bucket=self.bucket)
