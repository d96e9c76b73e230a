"""Legal-action masks for controllable field players."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError
from .core import in_opponent_box
from .state import MOVE_ACTIONS, NUM_ACTIONS, ActionId, AgentId, Mode, WorldState

_PASSES_AND_SHOT = np.array([ActionId.SHORT_PASS, ActionId.LONG_PASS, ActionId.SHOT])
_MOVES = np.array([int(a) for a in MOVE_ACTIONS])
_IDLE = int(ActionId.IDLE)
_SHORT = int(ActionId.SHORT_PASS)
_LONG = int(ActionId.LONG_PASS)
_SHOT = int(ActionId.SHOT)
_SLIDE = int(ActionId.SLIDE)
_IN_PLAY = Mode.IN_PLAY


def legal_action_mask(state: WorldState, agent: AgentId) -> np.ndarray:
    """Boolean mask over the 14 actions for a field player.

    1. a teammate owns the ball and it is far: no passes or shot;
    2. an opponent owns the ball and it is far: no slide;
    3. nobody owns the ball and it is far: no passes, shot or slide;
    4. shot only inside the opponent penalty area, long pass only outside it;
    5. at kickoff / free kick the taker may only pass and everybody else
       may only stand or move.
    """
    team, idx = agent
    cfg = state.config
    if team not in (0, 1) or not 1 <= idx < cfg.players_per_team:
        raise ContractError(f"{agent} is not a controllable field player")
    mask = np.ones(NUM_ACTIONS, dtype=bool)
    in_box = in_opponent_box(cfg, team, state.ball_pos)

    if state.mode != _IN_PLAY:
        mask[:] = False
        if state.owner == agent:
            mask[_SHORT] = True
            mask[_LONG] = not in_box
        else:
            mask[_IDLE] = True
            mask[_MOVES] = True
        return mask

    d = state.pos[team, idx] - state.ball_pos
    far = math.hypot(d[0], d[1]) > cfg.far_threshold
    owner = state.owner
    if far:
        if owner is None:
            mask[_PASSES_AND_SHOT] = False
            mask[_SLIDE] = False
        elif owner[0] == team:
            mask[_PASSES_AND_SHOT] = False
        else:
            mask[_SLIDE] = False
    if in_box:
        mask[_LONG] = False
    else:
        mask[_SHOT] = False
    return mask


def team_masks(state: WorldState, team: int) -> np.ndarray:
    return np.stack([legal_action_mask(state, a) for a in state.agent_ids(team)])
