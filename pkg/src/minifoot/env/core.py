"""Transition function of the miniature football simulator."""
from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ContractError
from .config import SimConfig
from .state import (
    LEFT,
    MOVE_VECTORS,
    NUM_ACTIONS,
    ActionId,
    AgentId,
    Mode,
    Role,
    WorldState,
    team_sign,
)

# Lineup rows are (role, x, y) as fractions of the half-length / half-width,
# expressed for the left team; the right team is the point mirror.
_KEEPER_X = -0.98
_DEFENDER_X = -0.6
_MIDFIELDER_X = -0.3


def lineup_table(players_per_team: int):
    """Role and normalised position of every slot for a team of the given size."""
    field = players_per_team - 1
    rows = [(Role.KEEPER, _KEEPER_X, 0.0)]
    # the kicker stands half a possession radius behind the centre spot;
    # its x is filled in by ``lineup_positions``
    rows.append((Role.FORWARD, None, 0.0))
    rest = field - 1
    n_def = (rest + 1) // 2
    n_mid = rest - n_def
    for role, x, n in ((Role.DEFENDER, _DEFENDER_X, n_def), (Role.MIDFIELDER, _MIDFIELDER_X, n_mid)):
        ys = [0.0] if n == 1 else list(np.linspace(-0.7, 0.7, n)) if n > 1 else []
        rows.extend((role, x, float(y)) for y in ys)
    return rows


def lineup_positions(config: SimConfig) -> np.ndarray:
    """World positions (2, P, 2) of the kickoff lineup."""
    L, W = config.pitch_half_length, config.pitch_half_width
    pos = np.zeros((2, config.players_per_team, 2))
    for i, (role, x, y) in enumerate(lineup_table(config.players_per_team)):
        if x is None:
            left = (-0.5 * config.possession_radius, 0.0)
        else:
            left = (x * L, y * W)
        pos[0, i] = left
        pos[1, i] = (-left[0], -left[1])
    return pos


def _roles(config: SimConfig):
    team = tuple(row[0] for row in lineup_table(config.players_per_team))
    return (team, team)


def _kickoff_arrays(config: SimConfig):
    P = config.players_per_team
    pos = lineup_positions(config)
    vel = np.zeros((2, P, 2))
    facing = np.zeros((2, P, 2))
    facing[0, :, 0] = 1.0
    facing[1, :, 0] = -1.0
    sprinting = np.zeros((2, P), dtype=bool)
    return pos, vel, facing, sprinting


def reset(config: SimConfig, seed: Optional[int] = None) -> WorldState:
    """Kickoff state with the left team in possession.

    The lineup is fully determined by the configuration, so two resets with
    the same configuration are bit-identical; ``seed`` is accepted for the
    interface and recorded nowhere else because the initial state draws no
    randomness.
    """
    if not isinstance(config, SimConfig):
        raise ContractError("reset expects a SimConfig")
    config.validate()
    pos, vel, facing, sprinting = _kickoff_arrays(config)
    return WorldState(
        config=config,
        step=0,
        pos=pos,
        vel=vel,
        facing=facing,
        sprinting=sprinting,
        roles=_roles(config),
        ball_pos=np.zeros(2),
        ball_vel=np.zeros(2),
        ball_aerial=False,
        owner=(LEFT, 1),
        score=(0, 0),
        mode=Mode.KICKOFF,
        last_touch=(LEFT, 1),
    )


# ---------------------------------------------------------------------------
# geometry helpers


def in_opponent_box(config: SimConfig, team: int, xy) -> bool:
    s = team_sign(team)
    x, y = xy[0] * s, xy[1] * s
    return x >= config.pitch_half_length - config.box_depth and abs(y) <= config.box_half_width


def second_last_defender_x(pos: np.ndarray, attacking_team: int) -> float:
    """x (attacking frame) of the second-deepest defender of the other team."""
    s = team_sign(attacking_team)
    xs = np.sort(pos[1 - attacking_team, :, 0] * s)
    return float(xs[-2])


def offside_position(config: SimConfig, pos: np.ndarray, ball_pos, team: int, idx: int) -> bool:
    """Whether (team, idx) would be offside if the ball were played now."""
    if not config.offside_enabled:
        return False
    s = team_sign(team)
    x = pos[team, idx, 0] * s
    return bool(x > 0.0 and x > ball_pos[0] * s and x > second_last_defender_x(pos, team))


def _unit(v) -> np.ndarray:
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        return np.zeros(2)
    return np.asarray(v, dtype=np.float64) / n


def pass_target(state: WorldState, passer: AgentId, long: bool) -> AgentId:
    """Receiver chosen by the pass model.

    Short pass: nearest teammate within 45 degrees of the passer's facing,
    falling back to the nearest teammate. Long pass: the most advanced
    teammate. Keepers use the long-pass rule for every kick.
    """
    team, idx = passer
    P = state.config.players_per_team
    here = state.pos[team, idx]
    mates = [j for j in range(P) if j != idx]
    s = team_sign(team)
    if long or idx == 0:
        return (team, max(mates, key=lambda j: (state.pos[team, j, 0] * s, -j)))
    face = state.facing[team, idx]
    best, best_any = None, None
    for j in mates:
        d = state.pos[team, j] - here
        dist = math.hypot(d[0], d[1])
        key = (dist, j)
        if best_any is None or key < best_any:
            best_any = key
        if dist > 0 and (d[0] * face[0] + d[1] * face[1]) >= dist * math.sqrt(0.5) - 1e-12:
            if best is None or key < best:
                best = key
    return (team, (best or best_any)[1])


def shot_goal_probability(config: SimConfig, shooter_xy, keeper_xy, team: int) -> float:
    s = team_sign(team)
    sx, sy = shooter_xy[0] * s, shooter_xy[1] * s
    ky = keeper_xy[1] * s
    d = math.hypot(config.pitch_half_length - sx, sy)
    frac = min(max(d / config.shot_range, 0.0), 1.0)
    on_target = 1.0 - frac
    alignment = min(max(1.0 - abs(ky - sy) / (2 * config.goal_half_width), 0.0), 1.0)
    save = config.keeper_skill * alignment * frac
    return on_target * (1.0 - save)


def keeper_action(state: WorldState, team: int) -> ActionId:
    """Scripted goalkeeper: kick long when holding the ball, else track the ball's y on the line."""
    cfg = state.config
    if state.owner == (team, 0):
        return ActionId.LONG_PASS
    s = team_sign(team)
    here = state.pos[team, 0] * s
    target_x = -cfg.pitch_half_length + 0.02 * cfg.pitch_half_length
    target_y = min(max(state.ball_pos[1] * s, -cfg.goal_half_width), cfg.goal_half_width)
    return move_toward(here, (target_x, target_y), tolerance=0.5 * cfg.base_speed)


def move_toward(here, target, tolerance: float = 1e-3) -> ActionId:
    """Quantise the direction from ``here`` to ``target`` (both team frame) to a move action."""
    dx, dy = target[0] - here[0], target[1] - here[1]
    if math.hypot(dx, dy) <= tolerance:
        return ActionId.IDLE
    angle = math.atan2(dy, dx)
    sector = int(round(angle / (math.pi / 4))) % 8
    # sector 0 = +x, counter-clockwise
    return _SECTOR_ACTIONS[sector]


_SECTOR_ACTIONS = (
    ActionId.RIGHT,
    ActionId.TOP_RIGHT,
    ActionId.TOP,
    ActionId.TOP_LEFT,
    ActionId.LEFT,
    ActionId.BOTTOM_LEFT,
    ActionId.BOTTOM,
    ActionId.BOTTOM_RIGHT,
)


# ---------------------------------------------------------------------------
# transition

_IDLE = int(ActionId.IDLE)
_SPRINT = int(ActionId.SPRINT_TOGGLE)
_SHOT = int(ActionId.SHOT)
_SHORT = int(ActionId.SHORT_PASS)
_LONG = int(ActionId.LONG_PASS)
_SLIDE = int(ActionId.SLIDE)
_MOVE_TABLE = np.zeros((NUM_ACTIONS, 2))
_IS_MOVE = [False] * NUM_ACTIONS
for _a, _v in MOVE_VECTORS.items():
    _MOVE_TABLE[int(_a)] = _v
    _IS_MOVE[int(_a)] = True


def _claimant(pos, a, b, radius, exclude=()):
    """Player who first meets the ball moving from ``a`` to ``b``."""
    ab = b - a
    denom = float(ab @ ab)
    rel = pos - a  # (2, P, 2)
    if denom > 0.0:
        s = np.clip((rel @ ab) / denom, 0.0, 1.0)
    else:
        s = np.zeros(pos.shape[:2])
    closest = a + s[..., None] * ab
    dist = np.hypot(*(pos - closest).transpose(2, 0, 1))
    best = None
    for team in (0, 1):
        for idx in range(pos.shape[1]):
            if (team, idx) in exclude or dist[team, idx] > radius:
                continue
            key = (float(s[team, idx]), float(dist[team, idx]), team, idx)
            if best is None or key < best:
                best = key
    return None if best is None else (best[2], best[3])


def step(state: WorldState, actions_left: Sequence[int], actions_right: Sequence[int], rng: np.random.Generator):
    """Advance one step. Returns ``(next_state, events)``.

    Actions are given in each team's own attacking frame. An action that is
    illegal under the mask is replaced with ``IDLE`` and reported as an
    ``illegal_action`` event.
    """
    from .events import detect_events
    from .masking import legal_action_mask

    cfg = state.config
    F = cfg.field_players
    if len(actions_left) != F or len(actions_right) != F:
        raise ContractError(
            f"expected {F} actions per team, got {len(actions_left)} and {len(actions_right)}"
        )
    if state.step >= cfg.episode_length:
        raise ContractError("episode already finished")

    P = cfg.players_per_team
    touches: List[tuple] = []
    acts = np.zeros((2, P), dtype=np.int64)
    for team, alist in ((0, actions_left), (1, actions_right)):
        for k, a in enumerate(alist):
            agent = (team, k + 1)
            ai = int(a)
            if not 0 <= ai < NUM_ACTIONS or ai != a:
                raise ContractError(f"unknown action {a!r} for agent {agent}")
            if not legal_action_mask(state, agent)[ai]:
                touches.append(("illegal", agent, ai))
                ai = _IDLE
            acts[team, k + 1] = ai
        acts[team, 0] = keeper_action(state, team)

    pos = state.pos.copy()
    vel = state.vel.copy()
    facing = state.facing.copy()
    sprinting = state.sprinting.copy()
    ball_pos = state.ball_pos.copy()
    ball_vel = state.ball_vel.copy()
    ball_aerial = state.ball_aerial
    owner = state.owner
    mode = state.mode
    mode_steps = state.mode_steps
    last_touch = state.last_touch
    pass_from, target, flight_left = state.pass_from, state.pass_target, state.flight_left
    assist_from = state.assist_from
    score = list(state.score)
    scored_by: Optional[int] = None

    # movement intents
    for team in (0, 1):
        sgn = team_sign(team)
        for i in range(P):
            a = int(acts[team, i])
            if a == _SPRINT:
                sprinting[team, i] = not sprinting[team, i]
            if a == _IDLE:
                vel[team, i] = 0.0
            elif _IS_MOVE[a]:
                d = _MOVE_TABLE[a] * sgn
                speed = cfg.base_speed * (cfg.sprint_multiplier if sprinting[team, i] else 1.0)
                vel[team, i] = d * speed
                facing[team, i] = d

    # ball actions of the current owner
    if owner is not None:
        a = int(acts[owner])
        oteam = owner[0]
        if a == _SHOT:
            touches.append(("shot", owner))
            keeper = (1 - oteam, 0)
            p_goal = shot_goal_probability(cfg, pos[owner], pos[keeper], oteam)
            if rng.random() < p_goal:
                assister = assist_from if assist_from is not None and assist_from != owner else None
                touches.append(("goal", owner, assister))
                score[oteam] += 1
                scored_by = oteam
            else:
                touches.append(("save", keeper, owner))
                owner = keeper
                last_touch = keeper
                assist_from = None
                ball_pos = pos[keeper].copy()
            vel[state.owner] = 0.0
        elif a == _SHORT or a == _LONG:
            long = a == _LONG
            receiver = pass_target(state, owner, long)
            touches.append(("pass", owner, receiver, bool(long)))
            offside = mode != Mode.KICKOFF and offside_position(cfg, state.pos, state.ball_pos, oteam, receiver[1])
            if offside:
                touches.append(("offside", receiver, owner))
                dteam = 1 - oteam
                spot = state.pos[receiver]
                kicker = min(
                    range(1, P), key=lambda j: (float(np.hypot(*(state.pos[dteam, j] - spot))), j)
                )
                owner = (dteam, kicker)
                touches.append(("freekick", owner, state.owner))
                ball_pos = pos[owner].copy()
                ball_vel = np.zeros(2)
                mode, mode_steps = Mode.FREE_KICK, 0
                pass_from = target = None
                flight_left = 0
                assist_from = None
                last_touch = owner
            else:
                pass_from, target = owner, receiver
                pass_speed = cfg.pass_speed_factor * cfg.base_speed
                delta = state.pos[receiver] - state.ball_pos
                dist = math.hypot(delta[0], delta[1])
                direction = _unit(delta) if dist > 0 else facing[owner]
                ball_vel = direction * pass_speed
                flight_left = max(1, int(math.ceil(dist / pass_speed - 1e-12)))
                ball_aerial = bool(long)
                last_touch = owner
                owner = None
                mode, mode_steps = Mode.IN_PLAY, 0

    # slide tackles against an owner who kept the ball
    if scored_by is None and owner is not None and owner == state.owner:
        radius = cfg.tackle_reach
        challengers = []
        for i in range(1, P):
            c = (1 - owner[0], i)
            if acts[c] == _SLIDE:
                d = float(np.hypot(*(state.pos[c] - state.ball_pos)))
                if d <= radius:
                    challengers.append((d, c[1], c))
        for _, _, c in sorted(challengers):
            if rng.random() < cfg.tackle_success:
                touches.append(("tackle", c, owner))
                vel[owner] = 0.0
                owner = c
                last_touch = c
                assist_from = None
                break

    if scored_by is not None:
        pos, vel, facing, sprinting = _kickoff_arrays(cfg)
        kicking = 1 - scored_by
        owner = (kicking, 1)
        ball_pos = np.zeros(2)
        ball_vel = np.zeros(2)
        ball_aerial = False
        mode, mode_steps = Mode.KICKOFF, 0
        pass_from = target = None
        flight_left = 0
        assist_from = None
        last_touch = owner
    else:
        L, W = cfg.pitch_half_length, cfg.pitch_half_width
        pos += vel
        np.clip(pos[..., 0], -L, L, out=pos[..., 0])
        np.clip(pos[..., 1], -W, W, out=pos[..., 1])

        if owner is not None:
            ball_pos = pos[owner].copy()
            ball_vel = vel[owner].copy()
        else:
            start = ball_pos.copy()
            exclude = ()
            if flight_left > 0:
                end = start + ball_vel
                end[0] = min(max(end[0], -L), L)
                end[1] = min(max(end[1], -W), W)
                hit_edge = not np.allclose(end, start + ball_vel)
                flight_left -= 1
                if hit_edge:
                    flight_left = 0
                landing = flight_left == 0
                exclude = (pass_from,) if pass_from is not None else ()
                can_claim = (not ball_aerial) or landing
                ball_pos = end
                if landing:
                    ball_vel = np.zeros(2)
                    ball_aerial = False
            else:
                end = start
                can_claim = True
            claimant = _claimant(pos, start, end, cfg.possession_radius, exclude) if can_claim else None
            if claimant is not None:
                touches.append(("claim", claimant, pass_from))
                if pass_from is not None:
                    if claimant[0] != pass_from[0]:
                        assist_from = None
                    elif claimant != pass_from:
                        assist_from = pass_from
                elif last_touch is not None and claimant[0] != last_touch[0]:
                    assist_from = None
                owner = claimant
                last_touch = claimant
                pass_from = target = None
                flight_left = 0
                ball_aerial = False
                ball_pos = pos[owner].copy()
                ball_vel = vel[owner].copy()

        if mode != Mode.IN_PLAY and not any(t[0] == "pass" for t in touches):
            mode_steps += 1
            if mode_steps >= cfg.set_piece_timeout:
                mode, mode_steps = Mode.IN_PLAY, 0

    nxt = WorldState(
        config=cfg,
        step=state.step + 1,
        pos=pos,
        vel=vel,
        facing=facing,
        sprinting=sprinting,
        roles=state.roles,
        ball_pos=ball_pos,
        ball_vel=ball_vel,
        ball_aerial=bool(ball_aerial),
        owner=owner,
        score=(score[0], score[1]),
        mode=mode,
        last_touch=last_touch,
        pass_from=pass_from,
        pass_target=target,
        flight_left=int(flight_left),
        assist_from=assist_from,
        mode_steps=int(mode_steps),
        touches=tuple(touches),
    )
    events = detect_events(state, (actions_left, actions_right), nxt)
    return nxt, events


def is_terminal(state: WorldState) -> bool:
    return state.step >= state.config.episode_length
