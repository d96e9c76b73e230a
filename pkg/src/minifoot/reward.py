"""Event-driven reward shaping.

Rewards are computed after the fact from a :class:`~minifoot.env.Replay`:
``r[t, i]`` is the reward of field agent ``i`` for transition ``t``. Columns
are the left team's field players followed by the right team's. Credit that
belongs to an earlier decision (an assist) is written back to the step at
which that decision was taken.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .env.core import in_opponent_box
from .env.replay import Replay
from .env.state import EventKind, Role, team_sign
from .errors import ConfigError

BALL_POSITION_HALF = 0.001
BALL_POSITION_BOX = 0.002
HOLD_BALL = 0.001
# (scored, conceded) multipliers
ROLE_COEFFICIENTS = {
    Role.FORWARD: (1.5, 0.5),
    Role.MIDFIELDER: (1.0, 1.0),
    Role.DEFENDER: (0.5, 1.5),
    Role.KEEPER: (1.0, 1.0),
}


class Component(str, enum.Enum):
    TEAM_GOAL = "team_goal"
    INDIVIDUAL_GOAL = "individual_goal"
    ASSIST = "assist"
    LOSE_BALL = "lose_ball"
    GAIN_BALL = "gain_ball"
    GOAL_DIFFERENCE = "goal_difference"
    WIN_REWARD = "win_reward"
    BALL_POSITION = "ball_position"
    GOAL_PASS = "goal_pass"
    SHOT_REWARD = "shot_reward"
    MIN_DISTANCE = "min_distance"
    LOST_POSSESSION = "lost_possession"
    GET_POSSESSION = "get_possession"
    HOLD_BALL = "hold_ball"
    ROLE_BASED = "role_based"
    PASSING = "passing"


def parse_component(name) -> Component:
    try:
        return Component(name)
    except ValueError:
        raise ConfigError(f"unknown reward component {name!r}") from None


@dataclass(frozen=True)
class RewardTerm:
    component: Component
    weight: float
    # weight applied to the negative part (conceding, ...); None = same as weight
    neg_weight: Optional[float] = None

    @property
    def negative(self) -> float:
        return self.weight if self.neg_weight is None else self.neg_weight


class RewardSpec:
    """Weighted list of reward components with unique ids."""

    def __init__(self, terms: Iterable = ()):
        out: List[RewardTerm] = []
        seen = set()
        for term in terms:
            if not isinstance(term, RewardTerm):
                comp, weight, *rest = term
                term = RewardTerm(parse_component(comp), float(weight), *(float(r) for r in rest))
            else:
                term = RewardTerm(parse_component(term.component), float(term.weight), term.neg_weight)
            for w in (term.weight, term.negative):
                if not math.isfinite(w):
                    raise ConfigError(f"reward weight for {term.component.value} is not finite")
            if term.component in seen:
                raise ConfigError(f"duplicate reward component {term.component.value}")
            seen.add(term.component)
            out.append(term)
        self.terms: Tuple[RewardTerm, ...] = tuple(out)

    @classmethod
    def from_dict(cls, data: Dict) -> "RewardSpec":
        """``{"team_goal": 1.0}`` or ``{"team_goal": {"weight": 1, "neg": 0.2}}``."""
        terms = []
        for name, value in data.items():
            if isinstance(value, dict):
                unknown = set(value) - {"weight", "neg", "pos"}
                if unknown:
                    raise ConfigError(f"unknown keys for reward {name}: {sorted(unknown)}")
                w = float(value.get("pos", value.get("weight", 1.0)))
                neg = value.get("neg")
                terms.append(RewardTerm(parse_component(name), w, None if neg is None else float(neg)))
            else:
                terms.append((name, float(value)))
        return cls(terms)

    def to_dict(self) -> Dict:
        out = {}
        for t in self.terms:
            if t.neg_weight is None:
                out[t.component.value] = t.weight
            else:
                out[t.component.value] = {"weight": t.weight, "neg": t.neg_weight}
        return out

    def __add__(self, other: "RewardSpec") -> "RewardSpec":
        merged: Dict[Component, RewardTerm] = {t.component: t for t in self.terms}
        for t in other.terms:
            if t.component in merged:
                a = merged[t.component]
                neg = None
                if a.neg_weight is not None or t.neg_weight is not None:
                    neg = a.negative + t.negative
                merged[t.component] = RewardTerm(t.component, a.weight + t.weight, neg)
            else:
                merged[t.component] = t
        return RewardSpec(merged.values())

    def __eq__(self, other):
        return isinstance(other, RewardSpec) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"RewardSpec({self.to_dict()!r})"


def asymmetric_goal_weights(pos_w: float, neg_w: float):
    """Transform splitting team_goal into +pos_w for scoring and -neg_w for conceding."""
    if pos_w < 0 or neg_w < 0:
        raise ConfigError("goal weights must be non-negative")

    def apply(spec: RewardSpec) -> RewardSpec:
        terms = [t for t in spec.terms if t.component != Component.TEAM_GOAL]
        terms.append(RewardTerm(Component.TEAM_GOAL, float(pos_w), float(neg_w)))
        return RewardSpec(terms)

    return apply


# ---------------------------------------------------------------------------


def _column(agent, F) -> Optional[int]:
    team, idx = agent
    if idx < 1:
        return None  # keepers are scripted and receive no reward
    return team * F + idx - 1


def component_parts(replay: Replay, component: Component) -> Tuple[np.ndarray, np.ndarray]:
    """Unweighted (positive part, negative part) of one component, each shape (T, 2F).

    The negative part holds magnitudes subtracted with the term's negative
    weight; most components only use one of the two.
    """
    cfg = replay.config
    F = cfg.field_players
    T = replay.num_transitions
    pos = np.zeros((T, 2 * F))
    neg = np.zeros((T, 2 * F))
    left, right = slice(0, F), slice(F, 2 * F)
    teams = (left, right)
    by_step = replay.events_by_step()
    c = component

    if c in (Component.TEAM_GOAL, Component.GOAL_DIFFERENCE, Component.ROLE_BASED):
        for t, evs in enumerate(by_step):
            for e in evs:
                if e.kind != EventKind.GOAL:
                    continue
                team = e.actor[0]
                if c == Component.ROLE_BASED:
                    for i in range(1, cfg.players_per_team):
                        up, _ = ROLE_COEFFICIENTS[Role(replay.roles[team][i])]
                        _, down = ROLE_COEFFICIENTS[Role(replay.roles[1 - team][i])]
                        pos[t, _column((team, i), F)] += up
                        neg[t, _column((1 - team, i), F)] += down
                else:
                    pos[t, teams[team]] += 1.0
                    neg[t, teams[1 - team]] += 1.0
    elif c == Component.INDIVIDUAL_GOAL:
        for t, evs in enumerate(by_step):
            for e in evs:
                col = _column(e.actor, F) if e.kind == EventKind.GOAL else None
                if col is not None:
                    pos[t, col] += 1.0
    elif c == Component.ASSIST:
        for step, agent in assist_credits(replay):
            col = _column(agent, F)
            if col is not None:
                pos[step, col] += 1.0
    elif c in (Component.LOSE_BALL, Component.GAIN_BALL):
        for t, evs in enumerate(by_step):
            for e in evs:
                if c == Component.LOSE_BALL and e.kind in (EventKind.POSSESSION_LOST, EventKind.PASS_INTERCEPTED):
                    col = _column(e.actor, F)
                    if col is not None:
                        neg[t, col] += 1.0
                if c == Component.GAIN_BALL:
                    gained = e.kind == EventKind.TACKLE_WON or (
                        e.kind == EventKind.POSSESSION_GAINED
                        and e.co_actor is not None
                        and e.co_actor[0] != e.actor[0]
                    )
                    col = _column(e.actor, F) if gained else None
                    if col is not None:
                        pos[t, col] += 1.0
    elif c in (Component.LOST_POSSESSION, Component.GET_POSSESSION):
        for t, evs in enumerate(by_step):
            for e in evs:
                if e.kind == EventKind.TACKLE_WON:
                    winner, loser = e.actor, e.co_actor
                elif e.kind == EventKind.PASS_INTERCEPTED:
                    winner, loser = e.co_actor, e.actor
                else:
                    continue
                if c == Component.GET_POSSESSION and winner is not None:
                    col = _column(winner, F)
                    if col is not None:
                        pos[t, col] += 1.0
                if c == Component.LOST_POSSESSION and loser is not None:
                    col = _column(loser, F)
                    if col is not None:
                        neg[t, col] += 1.0
    elif c == Component.WIN_REWARD:
        if T > 0:
            diff = int(replay.score[-1, 0] - replay.score[-1, 1])
            if diff > 0:
                pos[T - 1, left] = diff
            elif diff < 0:
                pos[T - 1, right] = -diff
    elif c == Component.BALL_POSITION:
        for t in range(T):
            ball = replay.ball_pos[t + 1]
            for team in (0, 1):
                if in_opponent_box(cfg, team, ball):
                    pos[t, teams[team]] = BALL_POSITION_BOX
                elif ball[0] * team_sign(team) > 0.0:
                    pos[t, teams[team]] = BALL_POSITION_HALF
    elif c == Component.MIN_DISTANCE:
        P = cfg.players_per_team
        p = replay.pos[1:]  # (T, 2, P, 2)
        for team in (0, 1):
            mine = p[:, team, 1:, None, :]
            theirs = p[:, 1 - team, None, 1:P, :]
            d = np.sqrt(((mine - theirs) ** 2).sum(-1)).min(axis=2)  # (T, F)
            neg[:, teams[team]] = d / cfg.pitch_diagonal
    elif c == Component.HOLD_BALL:
        for t in range(T):
            owner = replay.owner[t + 1]
            if owner is None:
                continue
            pos[t, teams[owner[0]]] = HOLD_BALL
            neg[t, teams[1 - owner[0]]] = HOLD_BALL
    elif c == Component.PASSING:
        for t, evs in enumerate(by_step):
            for e in evs:
                col = _column(e.actor, F)
                if col is None:
                    continue
                if e.kind == EventKind.PASS_COMPLETE:
                    pos[t, col] += 1.0
                elif e.kind == EventKind.PASS_INTERCEPTED:
                    neg[t, col] += 1.0
    elif c == Component.SHOT_REWARD:
        for t, evs in enumerate(by_step):
            shooters = {e.actor for e in evs if e.kind == EventKind.SHOT_ATTEMPT}
            for e in evs:
                if e.kind == EventKind.GOAL and e.actor in shooters:
                    col = _column(e.actor, F)
                    if col is not None:
                        pos[t, col] += 1.0
    elif c == Component.GOAL_PASS:
        chain = [0, 0]
        for t, evs in enumerate(by_step):
            for e in evs:
                if e.kind == EventKind.PASS_COMPLETE:
                    chain[e.actor[0]] += 1
                elif e.kind in (EventKind.PASS_INTERCEPTED, EventKind.POSSESSION_LOST):
                    chain[e.actor[0]] = 0
                elif e.kind == EventKind.GOAL:
                    team = e.actor[0]
                    pos[t, teams[team]] += chain[team]
                    chain = [0, 0]
    else:  # pragma: no cover - enum is exhaustive
        raise ConfigError(f"unknown reward component {component!r}")
    return pos, neg


def assist_credits(replay: Replay) -> List[Tuple[int, tuple]]:
    """(transition index, assister) pairs, one per assisted goal.

    The credit step is the step at which the assister released the pass
    that the scoring chain started from, i.e. the ``pass_attempt`` preceding
    the assister's last ``pass_complete`` before the goal.
    """
    by_step = replay.events_by_step()
    out = []
    last_attempt: Dict[tuple, int] = {}
    attempt_of_completion: Dict[tuple, int] = {}
    for t, evs in enumerate(by_step):
        for e in evs:
            if e.kind == EventKind.PASS_ATTEMPT:
                last_attempt[e.actor] = t
            elif e.kind == EventKind.PASS_COMPLETE and e.actor in last_attempt:
                attempt_of_completion[e.actor] = last_attempt[e.actor]
            elif e.kind == EventKind.GOAL and e.co_actor is not None:
                step = attempt_of_completion.get(e.co_actor)
                if step is not None:
                    out.append((step, e.co_actor))
    return out


def compute_reward_components(replay: Replay, spec: RewardSpec) -> Dict[str, np.ndarray]:
    """Weighted per-component reward matrices keyed by component id."""
    out = {}
    for term in spec.terms:
        pos, neg = component_parts(replay, term.component)
        out[term.component.value] = term.weight * pos - term.negative * neg
    return out


def compute_rewards(replay: Replay, spec: RewardSpec) -> np.ndarray:
    """Reward matrix of shape (T, 2F)."""
    F = replay.config.field_players
    total = np.zeros((replay.num_transitions, 2 * F))
    for mat in compute_reward_components(replay, spec).values():
        total += mat
    return total


ZERO_SUM_GOAL = RewardSpec([("team_goal", 1.0)])
STAGE1_SPEC = RewardSpec(
    [("team_goal", 5.0), ("individual_goal", 0.2), ("assist", 0.2), ("lose_ball", 0.05), ("min_distance", 0.01)]
)
