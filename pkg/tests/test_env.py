import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_state
from minifoot.env import (
    NUM_ACTIONS, ActionId, EventKind, Mode, Replay, Role, SimConfig, basic_dim, detect_events, encode_basic,
    encode_enhanced, encode_team, enhanced_dim, is_terminal, legal_action_mask, lineup_positions, reset,
    scripted_bot, step, team_masks,
)
from minifoot.env.core import move_toward, shot_goal_probability
from minifoot.errors import ConfigError, ContractError, ReplayParseError

IDLE = int(ActionId.IDLE)


# -- reset / config ---------------------------------------------------------------


def test_reset_four_per_team_kickoff():
    s = reset(SimConfig(players_per_team=4), 0)
    assert s.pos.shape == (2, 4, 2)
    assert np.array_equal(s.ball_pos, [0.0, 0.0])
    assert s.mode == Mode.KICKOFF
    assert s.owner == (0, 1)
    assert s.score == (0, 0)


def test_reset_is_deterministic():
    cfg = SimConfig(players_per_team=4)
    assert reset(cfg, 7).equals(reset(cfg, 7))


def test_two_per_team_lineup_is_mirrored():
    cfg = SimConfig(players_per_team=2)
    s = reset(cfg, 0)
    assert [r for r in s.roles[0]] == [Role.KEEPER, Role.FORWARD]
    assert s.roles[0] == s.roles[1]
    pos = lineup_positions(cfg)
    np.testing.assert_array_equal(pos[1], -pos[0])
    # keeper on the goal line side, kicker just behind the spot
    assert pos[0, 0, 0] == pytest.approx(-0.98)
    assert pos[0, 1, 0] == pytest.approx(-0.5 * cfg.possession_radius)


@pytest.mark.parametrize("bad", [
    {"players_per_team": 1}, {"episode_length": 0}, {"base_speed": -0.1}, {"keeper_skill": 1.5},
    {"box_depth": 5.0}, {"pitch_half_length": float("nan")},
])
def test_invalid_config_rejected(bad):
    with pytest.raises(ConfigError):
        SimConfig(**bad)


def test_unknown_sim_key_rejected():
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"players": 3})


# -- step -------------------------------------------------------------------------


def test_move_right_advances_by_base_speed(rng):
    cfg = SimConfig(players_per_team=3, base_speed=0.01)
    s = make_state(cfg, owner=(0, 1))
    x0 = s.pos[0, 1, 0]
    nxt, events = step(s, [int(ActionId.RIGHT), IDLE], [IDLE, IDLE], rng)
    assert nxt.pos[0, 1, 0] == pytest.approx(x0 + 0.01, abs=1e-15)
    assert nxt.owner == (0, 1)
    np.testing.assert_array_equal(nxt.ball_pos, nxt.pos[0, 1])
    assert events == []


def test_right_team_moves_in_its_own_frame(rng):
    cfg = SimConfig(players_per_team=3, base_speed=0.01)
    s = make_state(cfg, owner=None, ball_pos=[0.5, 0.3])
    x0 = s.pos[1, 1, 0]
    nxt, _ = step(s, [IDLE, IDLE], [int(ActionId.RIGHT), IDLE], rng)
    assert nxt.pos[1, 1, 0] == pytest.approx(x0 - 0.01)


def test_sprint_multiplies_speed(rng):
    cfg = SimConfig(players_per_team=3, base_speed=0.01, sprint_multiplier=1.5)
    s = make_state(cfg, owner=None, ball_pos=[0.5, 0.3])
    s, _ = step(s, [int(ActionId.SPRINT_TOGGLE), IDLE], [IDLE, IDLE], rng)
    assert s.sprinting[0, 1]
    x0 = s.pos[0, 1, 0]
    s, _ = step(s, [int(ActionId.RIGHT), IDLE], [IDLE, IDLE], rng)
    assert s.pos[0, 1, 0] - x0 == pytest.approx(0.015)


def test_shot_from_goal_mouth_scores(rng):
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[0, 1] = (cfg.pitch_half_length, 0.0)
    s = make_state(cfg, pos=pos, ball_pos=pos[0, 1], owner=(0, 1))
    assert shot_goal_probability(cfg, pos[0, 1], pos[1, 0], 0) == 1.0
    nxt, events = step(s, [int(ActionId.SHOT), IDLE], [IDLE, IDLE], rng)
    kinds = [e.kind for e in events]
    assert kinds == [EventKind.SHOT_ATTEMPT, EventKind.GOAL]
    assert nxt.score == (1, 0)
    assert nxt.mode == Mode.KICKOFF
    assert nxt.owner == (1, 1)


def test_short_pass_completes_within_flight_time(rng):
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[0, 1] = (0.0, 0.0)
    pos[0, 2] = (0.2, 0.0)
    # opponents far away from the lane
    pos[1, 1] = (0.5, 0.4)
    pos[1, 2] = (0.6, -0.4)
    facing = np.zeros((2, 3, 2))
    facing[0, :, 0] = 1.0
    facing[1, :, 0] = -1.0
    s = make_state(cfg, pos=pos, facing=facing, ball_pos=[0.0, 0.0], owner=(0, 1))
    s, events = step(s, [int(ActionId.SHORT_PASS), IDLE], [IDLE, IDLE], rng)
    assert [e.kind for e in events] == [EventKind.PASS_ATTEMPT]
    assert events[0].co_actor == (0, 2)
    flight = math.ceil(0.2 / (cfg.pass_speed_factor * cfg.base_speed))
    seen = []
    for _ in range(flight):
        s, events = step(s, [IDLE, IDLE], [IDLE, IDLE], rng)
        seen.extend(events)
    assert [e.kind for e in seen] == [EventKind.PASS_COMPLETE]
    assert seen[0].actor == (0, 1) and seen[0].co_actor == (0, 2)
    assert s.owner == (0, 2)


def test_intercepted_pass_events(rng):
    cfg = SimConfig(players_per_team=3, offside_enabled=False)
    pos = lineup_positions(cfg)
    pos[0, 1] = (0.0, 0.0)
    pos[0, 2] = (0.3, 0.0)
    pos[1, 1] = (0.15, 0.0)  # standing in the lane
    pos[1, 2] = (0.6, -0.4)
    s = make_state(cfg, pos=pos, ball_pos=[0.0, 0.0], owner=(0, 1))
    s, _ = step(s, [int(ActionId.SHORT_PASS), IDLE], [IDLE, IDLE], rng)
    seen = []
    while s.owner is None:
        s, events = step(s, [IDLE, IDLE], [IDLE, IDLE], rng)
        seen.extend(events)
    assert [e.kind for e in seen] == [EventKind.PASS_INTERCEPTED, EventKind.POSSESSION_GAINED]
    assert seen[0].actor == (0, 1) and seen[0].co_actor == (1, 1)
    assert s.owner == (1, 1)


def test_wrong_action_count_is_contract_error(rng):
    s = reset(SimConfig(players_per_team=3), 0)
    with pytest.raises(ContractError):
        step(s, [IDLE], [IDLE, IDLE], rng)


def test_illegal_action_becomes_idle_and_is_reported(rng):
    s = make_state(SimConfig(players_per_team=3), owner=None, ball_pos=[0.8, 0.3])
    # nobody owns and ball is far: SHOT is masked
    nxt, events = step(s, [int(ActionId.SHOT), IDLE], [IDLE, IDLE], rng)
    assert [(e.kind, e.actor) for e in events] == [(EventKind.ILLEGAL_ACTION, (0, 1))]
    np.testing.assert_array_equal(nxt.vel[0, 1], [0.0, 0.0])


def test_episode_terminates(rng):
    cfg = SimConfig(players_per_team=2, episode_length=5)
    s = reset(cfg, 0)
    for _ in range(5):
        s, _ = step(s, [IDLE], [IDLE], rng)
    assert is_terminal(s)
    with pytest.raises(ContractError):
        step(s, [IDLE], [IDLE], rng)


# -- masking ----------------------------------------------------------------------


def test_mask_loose_far_ball_blocks_ball_actions():
    s = make_state(SimConfig(players_per_team=3), owner=None, ball_pos=[0.8, 0.3])
    m = legal_action_mask(s, (0, 1))
    for a in (ActionId.SHORT_PASS, ActionId.LONG_PASS, ActionId.SHOT, ActionId.SLIDE):
        assert not m[a]


def test_mask_owner_in_box_can_shoot_not_long_pass():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[0, 1] = (0.85, 0.0)
    s = make_state(cfg, pos=pos, ball_pos=pos[0, 1], owner=(0, 1))
    m = legal_action_mask(s, (0, 1))
    assert m[ActionId.SHOT] and not m[ActionId.LONG_PASS]
    pos[0, 1] = (0.2, 0.0)
    s = make_state(cfg, pos=pos, ball_pos=pos[0, 1], owner=(0, 1))
    m = legal_action_mask(s, (0, 1))
    assert not m[ActionId.SHOT] and m[ActionId.LONG_PASS]


def test_mask_right_team_box_is_on_the_left():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[1, 1] = (-0.85, 0.0)
    s = make_state(cfg, pos=pos, ball_pos=pos[1, 1], owner=(1, 1))
    assert legal_action_mask(s, (1, 1))[ActionId.SHOT]


def test_mask_teammate_owner_far_and_opponent_owner_far():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    s = make_state(cfg, pos=pos, ball_pos=pos[0, 2], owner=(0, 2))
    m = legal_action_mask(s, (0, 1))
    assert not m[ActionId.SHORT_PASS] and not m[ActionId.SHOT] and m[ActionId.SLIDE]
    s = make_state(cfg, pos=pos, ball_pos=pos[1, 2], owner=(1, 2))
    m = legal_action_mask(s, (0, 1))
    assert not m[ActionId.SLIDE] and m[ActionId.IDLE]


def test_mask_kickoff_rule():
    s = reset(SimConfig(players_per_team=3), 0)
    kicker = legal_action_mask(s, (0, 1))
    assert kicker.tolist() == [i in (ActionId.SHORT_PASS, ActionId.LONG_PASS) for i in range(NUM_ACTIONS)]
    other = legal_action_mask(s, (0, 2))
    assert other[:9].all() and not other[9:].any()


@settings(max_examples=60, deadline=None)
@given(bx=st.floats(-1, 1), by=st.floats(-0.42, 0.42), owner=st.sampled_from([None, (0, 1), (0, 2), (1, 1)]))
def test_moves_never_masked_in_play(bx, by, owner):
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    ball = pos[owner] if owner is not None else np.array([bx, by])
    s = make_state(cfg, pos=pos, ball_pos=ball, owner=owner)
    for agent in s.agent_ids(0) + s.agent_ids(1):
        assert legal_action_mask(s, agent)[:9].all()


def test_mask_rejects_keeper():
    with pytest.raises(ContractError):
        legal_action_mask(reset(SimConfig(players_per_team=3), 0), (0, 0))


# -- encoders ---------------------------------------------------------------------


def test_basic_dim_golden():
    # own 9 + ball 9 + 3 mates*5 + 4 opponents*5 + closest blocks 10
    assert basic_dim(4) == 63
    assert basic_dim(3) == 53
    assert enhanced_dim(4) == 63 + 3 + 4 + 2 + 3
    s = reset(SimConfig(players_per_team=4), 0)
    assert encode_basic(s, (0, 2)).shape == (63,)
    assert encode_enhanced(s, (0, 2)).shape == (75,)


def test_colocated_ball_gives_zero_relative_block():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    s = make_state(cfg, pos=pos, ball_pos=pos[0, 2], owner=(0, 2))
    x = encode_basic(s, (0, 2))
    np.testing.assert_array_equal(x[13:15], [0.0, 0.0])


def test_ownership_none_one_hot():
    s = make_state(SimConfig(players_per_team=3), owner=None, ball_pos=[0.1, 0.1])
    x = encode_basic(s, (0, 1))
    np.testing.assert_array_equal(x[15:18], [0.0, 0.0, 1.0])


def test_encoders_are_mirror_symmetric():
    # the lineup is point-symmetric, so a loose ball on the centre spot looks the same to both teams
    cfg = SimConfig(players_per_team=3)
    s = make_state(cfg, owner=None, ball_pos=[0.0, 0.0])
    np.testing.assert_allclose(encode_team(s, 0), encode_team(s, 1), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), steps=st.integers(0, 40), encoder=st.sampled_from(["basic", "enhanced"]))
def test_team_encoder_matches_per_agent_encoder(seed, steps, encoder):
    cfg = SimConfig(players_per_team=3, episode_length=60)
    rng = np.random.default_rng(seed)
    s = reset(cfg, seed)
    for _ in range(steps):
        s, _ = step(s, scripted_bot(s, 0, 0.0, False, rng), scripted_bot(s, 1, 0.0, False, rng), rng)
    single = encode_basic if encoder == "basic" else encode_enhanced
    for team in (0, 1):
        stacked = np.stack([single(s, a) for a in s.agent_ids(team)])
        np.testing.assert_allclose(encode_team(s, team, encoder), stacked, atol=1e-12)


def test_enhanced_offside_disabled_and_match_block():
    cfg = SimConfig(players_per_team=3, offside_enabled=False)
    pos = lineup_positions(cfg)
    pos[0, 2] = (0.9, 0.0)
    s = make_state(cfg, pos=pos, owner=(0, 1), ball_pos=pos[0, 1], mode=Mode.KICKOFF)
    x = encode_enhanced(s, (0, 1))
    base = basic_dim(3)
    np.testing.assert_array_equal(x[base:base + 2 + 3], 0.0)
    np.testing.assert_array_equal(x[-5:], [0.0, 1.0, 1.0, 0.0, 0.0])


def test_enhanced_offside_flag_for_teammate_beyond_line():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[0, 1] = (0.0, 0.0)
    pos[0, 2] = (0.8, 0.1)  # behind both right-team field players
    pos[1, 1] = (0.5, 0.0)
    pos[1, 2] = (0.4, 0.2)
    s = make_state(cfg, pos=pos, owner=(0, 1), ball_pos=pos[0, 1])
    x = encode_enhanced(s, (0, 1))
    base = basic_dim(3)
    # teammate flags cover players 0 and 2 in index order
    np.testing.assert_array_equal(x[base:base + 2], [0.0, 1.0])


# -- scripted bot ----------------------------------------------------------------


def test_bot_difficulty_zero_is_uniform_over_legal():
    cfg = SimConfig(players_per_team=3)
    s = make_state(cfg, owner=None, ball_pos=[0.8, 0.3])
    mask = legal_action_mask(s, (1, 1))
    rng = np.random.default_rng(3)
    counts = np.zeros(NUM_ACTIONS)
    n = 6000
    for _ in range(n):
        counts[scripted_bot(s, 1, 0.0, False, rng)[0]] += 1
    assert counts[~mask].sum() == 0
    expected = n / mask.sum()
    chi2 = (((counts[mask] - expected) ** 2) / expected).sum()
    assert chi2 < 35.0  # df <= 13; p ~ 1e-3


def test_bot_shoots_in_range():
    cfg = SimConfig(players_per_team=3)
    pos = lineup_positions(cfg)
    pos[1, 1] = (-0.8, 0.0)
    s = make_state(cfg, pos=pos, owner=(1, 1), ball_pos=pos[1, 1])
    acts = scripted_bot(s, 1, 1.0, False, np.random.default_rng(0))
    assert acts[0] == ActionId.SHOT


def test_move_toward_quantisation():
    assert move_toward((0, 0), (1, 0)) == ActionId.RIGHT
    assert move_toward((0, 0), (0, 1)) == ActionId.TOP
    assert move_toward((0, 0), (-1, -1)) == ActionId.BOTTOM_LEFT
    assert move_toward((0, 0), (0, 0)) == ActionId.IDLE


def test_offside_blind_bot_concedes_more_to_forward_runners():
    """A blind defensive line lets an always-forward team score more often."""
    from minifoot.runtime.controllers import BotController, FunctionController
    from minifoot.runtime.rollout import play_match

    cfg = SimConfig(players_per_team=3, episode_length=300)

    def forward(state, team, rng):
        return scripted_bot(state, team, 1.0, True, rng)

    goals = {}
    for blind in (False, True):
        total = 0
        for ep in range(6):
            final, _ = play_match(cfg, FunctionController(forward), BotController(1.0, blind),
                                  np.random.default_rng(100 + ep))
            total += final.score[0]
        goals[blind] = total
    assert goals[True] >= goals[False]


# -- events -----------------------------------------------------------------------


def test_detect_events_no_change_is_empty(rng):
    s = make_state(SimConfig(players_per_team=3), owner=(0, 1), ball_pos=lineup_positions(SimConfig(players_per_team=3))[0, 1])
    nxt, events = step(s, [IDLE, IDLE], [IDLE, IDLE], rng)
    assert events == []
    assert detect_events(s, None, nxt) == []


def test_detect_events_rejects_non_consecutive(rng):
    s = reset(SimConfig(players_per_team=3), 0)
    nxt, _ = step(s, [IDLE, IDLE], [IDLE, IDLE], rng)
    nxt2, _ = step(nxt, [IDLE, IDLE], [IDLE, IDLE], rng)
    with pytest.raises(ContractError):
        detect_events(s, None, nxt2)


# -- whole-episode properties -----------------------------------------------------


def _random_episode(seed, P=3, length=150, difficulty=0.3):
    cfg = SimConfig(players_per_team=P, episode_length=length)
    rng = np.random.default_rng(seed)
    s = reset(cfg, seed)
    states, joint, events = [s], [], []
    while not is_terminal(s):
        a = (scripted_bot(s, 0, difficulty, False, rng), scripted_bot(s, 1, difficulty, False, rng))
        s, ev = step(s, a[0], a[1], rng)
        states.append(s)
        joint.append(a)
        events.extend(ev)
    return states, joint, events


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), P=st.sampled_from([2, 3, 4]))
def test_episode_invariants(seed, P):
    states, _, events = _random_episode(seed, P)
    cfg = states[0].config
    vmax = cfg.base_speed * cfg.sprint_multiplier
    for a, b in zip(states, states[1:]):
        assert b.step == a.step + 1
        assert np.all(np.abs(b.pos[..., 0]) <= cfg.pitch_half_length)
        assert np.all(np.abs(b.pos[..., 1]) <= cfg.pitch_half_width)
        assert b.score[0] >= a.score[0] and b.score[1] >= a.score[1]
        if b.mode != Mode.KICKOFF or b.score == a.score:
            assert np.all(np.linalg.norm(b.pos - a.pos, axis=-1) <= vmax + 1e-12)
        if b.owner is not None:
            np.testing.assert_array_equal(b.ball_pos, b.pos[b.owner])
    goals = sum(1 for e in events if e.kind == EventKind.GOAL)
    assert goals == sum(states[-1].score)


def test_same_seed_same_episode():
    a, _, ea = _random_episode(11)
    b, _, eb = _random_episode(11)
    assert all(x.equals(y) for x, y in zip(a, b))
    assert ea == eb


# -- replay -----------------------------------------------------------------------


def test_replay_round_trip(tmp_path):
    states, joint, events = _random_episode(5, length=80)
    rep = Replay.from_states(states, joint, events)
    path = tmp_path / "r.jsonl"
    rep.write(path)
    back = Replay.read(path)
    np.testing.assert_array_equal(back.pos, rep.pos)
    np.testing.assert_array_equal(back.actions, rep.actions)
    assert back.events == rep.events
    assert back.owner == rep.owner
    for t in (0, 17, 79):
        np.testing.assert_array_equal(encode_team(back.state_at(t), 0), encode_team(states[t], 0))


def test_replay_parse_error_has_line(tmp_path):
    states, joint, events = _random_episode(5, length=10)
    path = tmp_path / "r.jsonl"
    Replay.from_states(states, joint, events).write(path)
    lines = path.read_text().splitlines()
    lines[4] = lines[4][:-5]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ReplayParseError) as err:
        Replay.read(path)
    assert err.value.line == 5
    assert ":5:" in str(err.value)


def test_team_masks_shape():
    s = reset(SimConfig(players_per_team=4), 0)
    assert team_masks(s, 1).shape == (3, NUM_ACTIONS)
