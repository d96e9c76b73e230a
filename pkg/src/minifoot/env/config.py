from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class SimConfig:
    """Static parameters of the miniature football simulator.

    Coordinates follow the usual convention of the full-size engine: the
    pitch spans ``x in [-L, L]`` and ``y in [-W, W]``; the left team defends
    the goal at ``x = -L``. Speeds are in pitch units per step.
    """

    players_per_team: int = 4
    pitch_half_length: float = 1.0
    pitch_half_width: float = 0.42
    episode_length: int = 500
    base_speed: float = 0.02
    sprint_multiplier: float = 1.5
    possession_radius: float = 0.03
    offside_enabled: bool = True
    seed: int = 0
    # masking: ball "far" from a player beyond this distance
    far_threshold: float = 0.15
    goal_half_width: float = 0.1
    box_depth: float = 0.3
    box_half_width: float = 0.24
    shot_range: float = 0.5
    keeper_skill: float = 0.5
    tackle_success: float = 0.5
    # ball flight speed as a multiple of base_speed
    pass_speed_factor: float = 3.0
    # steps before an untaken kickoff/free kick reverts to open play
    set_piece_timeout: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.players_per_team, int) or self.players_per_team < 2:
            raise ConfigError("players_per_team must be an integer >= 2 (one keeper plus field players)")
        if not isinstance(self.episode_length, int) or self.episode_length < 1:
            raise ConfigError("episode_length must be an integer >= 1")
        positive = (
            "pitch_half_length", "pitch_half_width", "base_speed", "sprint_multiplier",
            "possession_radius", "far_threshold", "goal_half_width", "box_depth",
            "box_half_width", "shot_range", "pass_speed_factor",
        )
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a finite positive number, got {value!r}")
        for name in ("keeper_skill", "tackle_success"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
        if self.set_piece_timeout < 1:
            raise ConfigError("set_piece_timeout must be >= 1")
        if self.box_depth >= 2 * self.pitch_half_length:
            raise ConfigError("box_depth must be shorter than the pitch")

    @property
    def field_players(self) -> int:
        return self.players_per_team - 1

    @property
    def pitch_diagonal(self) -> float:
        return math.hypot(2 * self.pitch_half_length, 2 * self.pitch_half_width)

    @property
    def tackle_reach(self) -> float:
        return 2.0 * self.possession_radius

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown simulator keys: {sorted(unknown)}")
        return cls(**data)
