"""Feature encoders. All features are expressed in the agent's attacking frame."""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .core import offside_position
from .state import AgentId, Mode, WorldState, team_sign

_ROLES = 4
_MODES = 3


def basic_dim(players_per_team: int) -> int:
    """own (2+2+1+4) + ball (2+2+2+3) + 5 per other player + closest-mate and closest-opponent blocks."""
    P = players_per_team
    return 9 + 9 + 5 * (P - 1) + 5 * P + 10


def enhanced_dim(players_per_team: int) -> int:
    P = players_per_team
    return basic_dim(P) + (P - 1) + P + 2 + _MODES


def encoder_dim(name: str, players_per_team: int) -> int:
    if name == "basic":
        return basic_dim(players_per_team)
    if name == "enhanced":
        return enhanced_dim(players_per_team)
    raise ContractError(f"unknown encoder {name!r}")


def _check(state: WorldState, agent: AgentId):
    team, idx = agent
    if team not in (0, 1) or not 1 <= idx < state.config.players_per_team:
        raise ContractError(f"{agent} is not a controllable field player")


def _blocks(own_pos, own_vel, pos, vel):
    rel = pos - own_pos
    dist = np.sqrt((rel ** 2).sum(-1))
    return np.concatenate([rel, vel - own_vel, dist[:, None]], axis=1)


def encode_basic(state: WorldState, agent: AgentId) -> np.ndarray:
    _check(state, agent)
    team, idx = agent
    s = team_sign(team)
    pos = state.pos * s
    vel = state.vel * s
    ball = state.ball_pos * s
    bvel = state.ball_vel * s
    own_pos, own_vel = pos[team, idx], vel[team, idx]

    role = np.zeros(_ROLES)
    role[int(state.roles[team][idx])] = 1.0
    owner = state.owner
    ownership = np.zeros(3)
    ownership[2 if owner is None else (0 if owner[0] == team else 1)] = 1.0

    P = state.config.players_per_team
    mates = [j for j in range(P) if j != idx]
    mate_blocks = _blocks(own_pos, own_vel, pos[team, mates], vel[team, mates])
    opp_blocks = _blocks(own_pos, own_vel, pos[1 - team], vel[1 - team])
    closest_mate = mate_blocks[int(np.argmin(mate_blocks[:, 4]))]
    closest_opp = opp_blocks[int(np.argmin(opp_blocks[:, 4]))]
    return np.concatenate([
        own_pos, own_vel, [float(state.sprinting[team, idx])], role,
        ball, bvel, ball - own_pos, ownership,
        mate_blocks.ravel(), opp_blocks.ravel(),
        closest_mate, closest_opp,
    ])


def encode_enhanced(state: WorldState, agent: AgentId) -> np.ndarray:
    """Basic features plus offside flags and match state.

    Offside flags mark players currently standing in an offside position
    (teammates first, then opponents). Match state is (goal difference,
    fraction of steps remaining, mode one-hot).
    """
    base = encode_basic(state, agent)
    team, idx = agent
    cfg = state.config
    P = cfg.players_per_team
    mate_flags = [
        float(offside_position(cfg, state.pos, state.ball_pos, team, j)) for j in range(P) if j != idx
    ]
    opp_flags = [float(offside_position(cfg, state.pos, state.ball_pos, 1 - team, j)) for j in range(P)]
    mode = np.zeros(_MODES)
    mode[int(state.mode)] = 1.0
    diff = state.score[team] - state.score[1 - team]
    remaining = (cfg.episode_length - state.step) / cfg.episode_length
    return np.concatenate([base, mate_flags, opp_flags, [float(diff), remaining], mode])


ENCODERS = {"basic": encode_basic, "enhanced": encode_enhanced}


def _offside_flags(cfg, pos_t, ball_t, team_frame_sign_of, team):
    """Offside-position flags for every player of ``team`` (frame of that team)."""
    if not cfg.offside_enabled:
        return np.zeros(cfg.players_per_team)
    s = team_frame_sign_of
    x = pos_t[team, :, 0] * s
    defenders = np.sort(pos_t[1 - team, :, 0] * s)
    line = defenders[-2]
    bx = ball_t[0] * s
    return ((x > 0.0) & (x > bx) & (x > line)).astype(np.float64)


def encode_team(state: WorldState, team: int, encoder: str = "basic") -> np.ndarray:
    """Features of every field player of ``team``, shape (F, dim).

    Vectorised equivalent of stacking the per-agent encoders.
    """
    if encoder not in ENCODERS:
        raise ContractError(f"unknown encoder {encoder!r}")
    cfg = state.config
    P = cfg.players_per_team
    F = P - 1
    s = team_sign(team)
    pos = state.pos * s
    vel = state.vel * s
    ball = state.ball_pos * s
    bvel = state.ball_vel * s
    own_pos = pos[team, 1:]
    own_vel = vel[team, 1:]

    roles = np.zeros((F, _ROLES))
    roles[np.arange(F), [int(r) for r in state.roles[team][1:]]] = 1.0
    owner = state.owner
    ownership = np.zeros(3)
    ownership[2 if owner is None else (0 if owner[0] == team else 1)] = 1.0

    mates = _MATES.get(P)
    if mates is None:
        mates = _MATES.setdefault(P, np.array([[j for j in range(P) if j != i] for i in range(1, P)], dtype=np.int64))
    m_rel = pos[team][mates] - own_pos[:, None]
    m_vel = vel[team][mates] - own_vel[:, None]
    m_dist = np.sqrt((m_rel ** 2).sum(-1))
    mate_blocks = np.concatenate([m_rel, m_vel, m_dist[..., None]], axis=-1)  # (F, P-1, 5)
    o_rel = pos[1 - team][None] - own_pos[:, None]
    o_vel = vel[1 - team][None] - own_vel[:, None]
    o_dist = np.sqrt((o_rel ** 2).sum(-1))
    opp_blocks = np.concatenate([o_rel, o_vel, o_dist[..., None]], axis=-1)  # (F, P, 5)
    rows = np.arange(F)
    closest_mate = mate_blocks[rows, m_dist.argmin(axis=1)]
    closest_opp = opp_blocks[rows, o_dist.argmin(axis=1)]
    parts = [
        own_pos, own_vel, state.sprinting[team, 1:, None].astype(np.float64), roles,
        np.broadcast_to(ball, (F, 2)), np.broadcast_to(bvel, (F, 2)), ball - own_pos,
        np.broadcast_to(ownership, (F, 3)),
        mate_blocks.reshape(F, -1), opp_blocks.reshape(F, -1), closest_mate, closest_opp,
    ]
    if encoder == "enhanced":
        world = state.pos
        mine = _offside_flags(cfg, world, state.ball_pos, s, team)
        theirs = _offside_flags(cfg, world, state.ball_pos, -s, 1 - team)
        mode = np.zeros(_MODES)
        mode[int(state.mode)] = 1.0
        diff = state.score[team] - state.score[1 - team]
        remaining = (cfg.episode_length - state.step) / cfg.episode_length
        parts += [
            mine[mates], np.broadcast_to(theirs, (F, P)),
            np.broadcast_to(np.array([float(diff), remaining]), (F, 2)), np.broadcast_to(mode, (F, _MODES)),
        ]
    return np.concatenate(parts, axis=1)


_MATES: dict = {}
