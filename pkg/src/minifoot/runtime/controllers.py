"""Things that pick joint actions for one team."""
from __future__ import annotations

from typing import Callable, List, Optional

import numpy as np

from .. import nn
from ..env import encode_team, scripted_bot, team_masks
from ..errors import ConfigError


class PolicyController:
    """Samples from a policy snapshot (or takes the argmax when ``greedy``)."""

    def __init__(self, params: nn.PolicyParams, encoder: str = "basic", greedy: bool = False, name: str = "policy"):
        self.params = params
        self.encoder = encoder
        self.greedy = greedy
        self.name = name

    def act(self, state, team: int, rng: np.random.Generator) -> List[int]:
        feats = encode_team(state, team, self.encoder)
        masks = team_masks(state, team)
        if self.greedy:
            probs, _ = nn.actor_forward(self.params, feats, masks)
            return [int(a) for a in probs.argmax(axis=1)]
        actions, _, _ = nn.policy_step(self.params, feats, masks, rng, with_value=False)
        return [int(a) for a in actions]


class BotController:
    def __init__(self, difficulty: float = 1.0, offside_blind: bool = False, name: Optional[str] = None):
        if not 0.0 <= difficulty <= 1.0:
            raise ConfigError("bot difficulty must lie in [0, 1]")
        self.difficulty = float(difficulty)
        self.offside_blind = bool(offside_blind)
        self.name = name or format_bot_spec(self.difficulty, self.offside_blind)

    def act(self, state, team: int, rng: np.random.Generator) -> List[int]:
        return scripted_bot(state, team, self.difficulty, self.offside_blind, rng)


class FunctionController:
    """Wraps ``fn(state, team, rng) -> actions`` (used for scripted test opponents)."""

    def __init__(self, fn: Callable, name: str = "scripted"):
        self.fn = fn
        self.name = name

    def act(self, state, team, rng):
        return [int(a) for a in self.fn(state, team, rng)]


def format_bot_spec(difficulty: float, blind: bool = False) -> str:
    return f"bot:{difficulty:g}" + (":blind" if blind else "")


def is_scripted_spec(spec: str) -> bool:
    return spec == "random" or spec.startswith("bot:") or spec == "bot"


def parse_opponent(spec: str, resolve_policy: Optional[Callable[[str], object]] = None, encoder: str = "basic"):
    """``"bot:0.5"``, ``"bot:1.0:blind"``, ``"random"`` or a policy id."""
    if spec == "random":
        return BotController(0.0, name="random")
    if spec == "bot":
        return BotController(1.0)
    if spec.startswith("bot:"):
        parts = spec.split(":")[1:]
        try:
            difficulty = float(parts[0])
        except (IndexError, ValueError):
            raise ConfigError(f"bad bot spec {spec!r}") from None
        flags = set(parts[1:])
        if flags - {"blind"}:
            raise ConfigError(f"unknown bot flags in {spec!r}")
        return BotController(difficulty, "blind" in flags)
    if resolve_policy is None:
        raise ConfigError(f"cannot resolve policy opponent {spec!r}")
    params = resolve_policy(spec)
    return PolicyController(params, encoder=encoder, name=spec)
