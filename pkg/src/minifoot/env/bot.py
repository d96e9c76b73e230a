"""Rule-based opponent used as the benchmark and as a sparring partner."""
from __future__ import annotations

import math
from typing import List

import numpy as np

from .core import move_toward, offside_position, pass_target, second_last_defender_x
from .masking import legal_action_mask
from .state import ActionId, Mode, WorldState, team_sign

PRESSURE_RADIUS = 0.1
SUPPORT_AHEAD = 0.25


def _random_legal(mask: np.ndarray, rng: np.random.Generator) -> int:
    legal = np.flatnonzero(mask)
    return int(legal[rng.integers(len(legal))])


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def scripted_bot(
    state: WorldState,
    team: int,
    difficulty: float = 1.0,
    offside_blind: bool = False,
    rng: np.random.Generator | None = None,
) -> List[int]:
    """Joint action (team frame) for every field player of ``team``.

    Each player follows the rules below with probability ``difficulty`` and
    otherwise picks a uniformly random legal action. Rules: the owner shoots
    when in range, passes under pressure and dribbles toward goal otherwise;
    teammates of the owner run into support positions; without the ball the
    player closest to it chases (and slides when close) while the rest fall
    back between ball and goal. At difficulty >= 0.75 chasers sprint.

    ``offside_blind`` removes offside awareness: passes ignore the offside
    check, supporting runs ignore the defensive line, and defenders hold a
    high line at halfway no matter who is behind them.
    """
    if rng is None:
        rng = np.random.default_rng(state.config.seed)
    cfg = state.config
    s = team_sign(team)
    P = cfg.players_per_team
    L, W = cfg.pitch_half_length, cfg.pitch_half_width
    pos = state.pos * s
    ball = state.ball_pos * s
    owner = state.owner
    goal = (L, 0.0)

    field = list(range(1, P))
    chaser = min(field, key=lambda j: (_dist(pos[team, j], ball), j))
    actions = []
    for j in field:
        agent = (team, j)
        mask = legal_action_mask(state, agent)
        if rng.random() >= difficulty:
            actions.append(_random_legal(mask, rng))
            continue
        here = pos[team, j]
        a = _rule_action(state, agent, mask, here, pos, ball, goal, chaser, offside_blind, difficulty)
        if not mask[a]:
            a = ActionId.IDLE
        actions.append(int(a))
    return actions


def _rule_action(state, agent, mask, here, pos, ball, goal, chaser, blind, difficulty):
    cfg = state.config
    team, j = agent
    owner = state.owner
    L, W = cfg.pitch_half_length, cfg.pitch_half_width
    field = cfg.field_players

    if state.mode != Mode.IN_PLAY:
        if owner == agent:
            return ActionId.SHORT_PASS
        return ActionId.IDLE

    if owner == agent:
        if mask[ActionId.SHOT] and _dist(here, goal) <= cfg.shot_range:
            return ActionId.SHOT
        nearest_opp = min(_dist(here, pos[1 - team, k]) for k in range(cfg.players_per_team))
        if nearest_opp < PRESSURE_RADIUS and field > 1:
            for kind in (ActionId.SHORT_PASS, ActionId.LONG_PASS):
                if not mask[kind]:
                    continue
                receiver = pass_target(state, agent, kind == ActionId.LONG_PASS)
                if blind or not offside_position(cfg, state.pos, state.ball_pos, team, receiver[1]):
                    return kind
        return move_toward(here, goal)

    spread = (j - 1) / max(field - 1, 1) - 0.5 if field > 1 else 0.0
    if owner is not None and owner[0] == team:
        tx = min(ball[0] + SUPPORT_AHEAD, L - cfg.box_depth / 2)
        if not blind:
            line = second_last_defender_x(state.pos, team)
            tx = min(tx, line - cfg.possession_radius)
        ty = spread * W
        if _dist(here, (tx, ty)) < cfg.base_speed:
            return ActionId.IDLE
        return move_toward(here, (tx, ty))

    if j == chaser:
        if (
            owner is not None
            and mask[ActionId.SLIDE]
            and _dist(here, ball) <= cfg.tackle_reach
        ):
            return ActionId.SLIDE
        if difficulty >= 0.75 and not state.sprinting[team, j] and _dist(here, ball) > 2 * cfg.far_threshold:
            return ActionId.SPRINT_TOGGLE
        return move_toward(here, ball)

    tx = 0.5 * (ball[0] - L)
    if blind:
        tx = max(tx, 0.0)
    ty = 0.5 * ball[1] + spread * 0.5 * W
    if _dist(here, (tx, ty)) < cfg.base_speed:
        return ActionId.IDLE
    return move_toward(here, (tx, ty))
