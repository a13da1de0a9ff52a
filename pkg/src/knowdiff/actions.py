"""The discrete meta-action label space: direction x speed profile.

Indices are direction-major, speed-minor, in the enumeration order below;
the resulting integers [0, 23] are the stable wire format used by the
prior library and the one-hot context encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Direction(IntEnum):
    GO_STRAIGHT = 0
    LEFT_TURN = 1
    RIGHT_TURN = 2
    U_TURN = 3
    LANE_CHANGE_LEFT = 4
    LANE_CHANGE_RIGHT = 5


class SpeedProfile(IntEnum):
    ACCELERATE = 0
    CRUISE = 1
    DECELERATE = 2
    BRAKE = 3


DIRECTION_LABELS = {
    Direction.GO_STRAIGHT: "GoStraight",
    Direction.LEFT_TURN: "LeftTurn",
    Direction.RIGHT_TURN: "RightTurn",
    Direction.U_TURN: "UTurn",
    Direction.LANE_CHANGE_LEFT: "LaneChangeLeft",
    Direction.LANE_CHANGE_RIGHT: "LaneChangeRight",
}

SPEED_LABELS = {
    SpeedProfile.ACCELERATE: "Accelerate",
    SpeedProfile.CRUISE: "Cruise",
    SpeedProfile.DECELERATE: "Decelerate",
    SpeedProfile.BRAKE: "Brake",
}

_DIRECTION_BY_LABEL = {v: k for k, v in DIRECTION_LABELS.items()}
_SPEED_BY_LABEL = {v: k for k, v in SPEED_LABELS.items()}

N_SPEEDS = len(SpeedProfile)
N_ACTIONS = len(Direction) * N_SPEEDS


@dataclass(frozen=True, order=True)
class MetaAction:
    """One discrete high-level driving intent, e.g. (LeftTurn, Decelerate)."""

    direction: Direction
    speed: SpeedProfile

    @property
    def index(self) -> int:
        return int(self.direction) * N_SPEEDS + int(self.speed)

    @property
    def label(self) -> str:
        return f"{DIRECTION_LABELS[self.direction]}|{SPEED_LABELS[self.speed]}"

    @classmethod
    def from_index(cls, index: int) -> "MetaAction":
        if not 0 <= index < N_ACTIONS:
            raise ValueError(f"meta-action index {index} outside [0, {N_ACTIONS - 1}]")
        return cls(Direction(index // N_SPEEDS), SpeedProfile(index % N_SPEEDS))

    @classmethod
    def from_label(cls, label: str) -> "MetaAction":
        parts = label.strip().split("|")
        if len(parts) != 2:
            raise ValueError(f"meta-action label must be 'Direction|Speed', got {label!r}")
        d, s = parts[0].strip(), parts[1].strip()
        if d not in _DIRECTION_BY_LABEL or s not in _SPEED_BY_LABEL:
            raise ValueError(f"unknown meta-action label {label!r}")
        return cls(_DIRECTION_BY_LABEL[d], _SPEED_BY_LABEL[s])

    def __str__(self) -> str:
        return self.label


ALL_ACTIONS = tuple(MetaAction.from_index(i) for i in range(N_ACTIONS))
ALL_LABELS = tuple(a.label for a in ALL_ACTIONS)
