from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .config import SimConfig

AgentId = Tuple[int, int]  # (team, player index); team 0 = left, index 0 = keeper

LEFT, RIGHT = 0, 1


class ActionId(enum.IntEnum):
    IDLE = 0
    LEFT = 1
    TOP_LEFT = 2
    TOP = 3
    TOP_RIGHT = 4
    RIGHT = 5
    BOTTOM_RIGHT = 6
    BOTTOM = 7
    BOTTOM_LEFT = 8
    SHORT_PASS = 9
    LONG_PASS = 10
    SHOT = 11
    SLIDE = 12
    SPRINT_TOGGLE = 13


NUM_ACTIONS = len(ActionId)

_D = math.sqrt(0.5)
# unit vectors in the acting team's frame (+x always attacks)
MOVE_VECTORS = {
    ActionId.LEFT: (-1.0, 0.0),
    ActionId.TOP_LEFT: (-_D, _D),
    ActionId.TOP: (0.0, 1.0),
    ActionId.TOP_RIGHT: (_D, _D),
    ActionId.RIGHT: (1.0, 0.0),
    ActionId.BOTTOM_RIGHT: (_D, -_D),
    ActionId.BOTTOM: (0.0, -1.0),
    ActionId.BOTTOM_LEFT: (-_D, -_D),
}
MOVE_ACTIONS = tuple(MOVE_VECTORS)
PASS_ACTIONS = (ActionId.SHORT_PASS, ActionId.LONG_PASS)


class Role(enum.IntEnum):
    KEEPER = 0
    DEFENDER = 1
    MIDFIELDER = 2
    FORWARD = 3


class Mode(enum.IntEnum):
    KICKOFF = 0
    IN_PLAY = 1
    FREE_KICK = 2


class EventKind(str, enum.Enum):
    PASS_ATTEMPT = "pass_attempt"
    PASS_COMPLETE = "pass_complete"
    PASS_INTERCEPTED = "pass_intercepted"
    SHOT_ATTEMPT = "shot_attempt"
    GOAL = "goal"
    TACKLE_WON = "tackle_won"
    POSSESSION_LOST = "possession_lost"
    POSSESSION_GAINED = "possession_gained"
    OFFSIDE_CALL = "offside_call"
    ILLEGAL_ACTION = "illegal_action"


@dataclass(frozen=True)
class Event:
    step: int
    kind: EventKind
    actor: AgentId
    co_actor: Optional[AgentId] = None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind.value,
            "actor": list(self.actor),
            "co_actor": None if self.co_actor is None else list(self.co_actor),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Event":
        co = data.get("co_actor")
        return cls(
            step=int(data["step"]),
            kind=EventKind(data["kind"]),
            actor=(int(data["actor"][0]), int(data["actor"][1])),
            co_actor=None if co is None else (int(co[0]), int(co[1])),
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WorldState:
    """Full simulator state. Arrays are read-only; every step builds a new state.

    ``pos``, ``vel`` and ``facing`` have shape (2, P, 2) indexed by
    (team, player, xy) in world coordinates. ``touches`` is the ball-contact
    log of the transition that produced this state; ``detect_events``
    turns it into canonical events.
    """

    config: SimConfig
    step: int
    pos: np.ndarray
    vel: np.ndarray
    facing: np.ndarray
    sprinting: np.ndarray
    roles: Tuple[Tuple[Role, ...], Tuple[Role, ...]]
    ball_pos: np.ndarray
    ball_vel: np.ndarray
    ball_aerial: bool
    owner: Optional[AgentId]
    score: Tuple[int, int]
    mode: Mode
    last_touch: Optional[AgentId] = None
    # pass context: set on release, kept until somebody claims the ball
    pass_from: Optional[AgentId] = None
    pass_target: Optional[AgentId] = None
    flight_left: int = 0
    # most recent teammate whose pass reached the current possession chain
    assist_from: Optional[AgentId] = None
    mode_steps: int = 0
    touches: tuple = field(default=())

    def __post_init__(self):
        for name in ("pos", "vel", "facing", "sprinting", "ball_pos", "ball_vel"):
            _frozen(getattr(self, name))

    @property
    def players_per_team(self) -> int:
        return self.config.players_per_team

    def agent_ids(self, team: int):
        return [(team, i) for i in range(1, self.config.players_per_team)]

    def equals(self, other: "WorldState") -> bool:
        """Bit-exact comparison of every field (arrays compared by bytes)."""
        if not isinstance(other, WorldState):
            return False
        for name in ("pos", "vel", "facing", "sprinting", "ball_pos", "ball_vel"):
            a, b = getattr(self, name), getattr(other, name)
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        scalars = (
            "config", "step", "roles", "ball_aerial", "owner", "score", "mode", "last_touch",
            "pass_from", "pass_target", "flight_left", "assist_from", "mode_steps", "touches",
        )
        return all(getattr(self, n) == getattr(other, n) for n in scalars)


def team_sign(team: int) -> float:
    """Multiplier mapping world coordinates into a team's attacking frame."""
    return 1.0 if team == LEFT else -1.0


def to_team_frame(team: int, xy):
    return np.asarray(xy, dtype=np.float64) * team_sign(team)
