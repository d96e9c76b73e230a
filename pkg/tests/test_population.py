import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_response_value, random_antisymmetric
from minifoot import nn
from minifoot.env import SimConfig
from minifoot.errors import ContractError
from minifoot.population import (
    LeagueConfig, PayoffMatrix, PipelineBudgets, PopulationStore, PsroConfig, elo_expected, elo_update,
    exploitability, league_run, nash_solve, pfsp_opponents, pfsp_weights, psro_run, psro_synthetic,
    three_stage_pipeline,
)
from minifoot.reward import RewardSpec
from minifoot.runtime.trainer import TrainConfig

RPS = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
# rock, paper, scissors, lizard, spock
RPSLS = np.array([
    [0, -1, 1, 1, -1],
    [1, 0, -1, -1, 1],
    [-1, 1, 0, 1, -1],
    [-1, 1, -1, 0, 1],
    [1, -1, 1, -1, 0],
], dtype=float)


# ---------------------------------------------------------------------------
# Nash


def test_rps_is_uniform():
    res = nash_solve(RPS)
    np.testing.assert_allclose(res.strategy, 1 / 3, atol=1e-3)
    assert res.converged


def test_dominance_is_exact():
    res = nash_solve([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(res.strategy, [1.0, 0.0])
    # strategy 2 beats everything; 0 and 1 play rock-paper among themselves
    M = np.array([[0, 1, -1], [-1, 0, -1], [1, 1, 0]], dtype=float)
    np.testing.assert_array_equal(nash_solve(M).strategy, [0.0, 0.0, 1.0])


def test_weighted_rps():
    # winning with rock pays 2: equilibrium (1/4, 1/2, 1/4) solves M x = 0
    M = np.array([[0, -1, 2], [1, 0, -1], [-2, 1, 0]], dtype=float)
    res = nash_solve(M)
    np.testing.assert_allclose(res.strategy, [0.25, 0.5, 0.25], atol=2e-3)
    assert exploitability(M, res.strategy) <= 1e-3 + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
def test_random_antisymmetric_exploitability(seed, n):
    M = random_antisymmetric(np.random.default_rng(seed), n)
    res = nash_solve(M)
    s = res.strategy
    assert np.all(s >= 0) and abs(s.sum() - 1) < 1e-12
    # the best pure reply, found by enumeration, gains at most the tolerance
    assert best_response_value(M, s) <= 1e-3 + 1e-12
    assert abs(exploitability(M, s) - best_response_value(M, s)) < 1e-12


def test_nash_rejects_bad_input():
    with pytest.raises(ContractError):
        nash_solve([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ContractError):
        nash_solve(np.zeros((2, 3)))
    with pytest.raises(ContractError):
        nash_solve([[0.0, np.nan], [np.nan, 0.0]])


# ---------------------------------------------------------------------------
# ratings and PFSP


def test_elo_examples():
    r = elo_update({"a": 1200.0, "b": 1200.0}, [("a", "b", 1.0)])
    assert r == {"a": 1216.0, "b": 1184.0}
    r = elo_update({"a": 1200.0, "b": 1200.0}, [("a", "b", 1.0), ("a", "b", 0.0)])
    assert r["a"] + r["b"] == 2400.0
    fav = elo_update({"a": 1600.0, "b": 1200.0}, [("a", "b", 1.0)])
    assert fav["a"] - 1600.0 == pytest.approx(32.0 * (1 - 1 / (1 + 10 ** -1)), abs=1e-12)
    assert fav["a"] - 1600.0 == pytest.approx(2.909, abs=1e-3)
    assert elo_expected(1500, 1500) == 0.5


def test_elo_win_and_loss():
    # from equal ratings a win and a loss are worth +16 and -16, so together they cancel
    win = elo_update({"a": 1200.0, "b": 1200.0}, [("a", "b", 1.0)])
    loss = elo_update({"a": 1200.0, "b": 1200.0}, [("a", "b", 0.0)])
    assert (win["a"] - 1200.0) + (loss["a"] - 1200.0) == 0.0
    # applied one after the other the loss is taken at 1216 vs 1184 and costs slightly more
    seq = elo_update({"a": 1200.0, "b": 1200.0}, [("a", "b", 1.0), ("a", "b", 0.0)])
    assert seq["a"] == pytest.approx(1216.0 - 32.0 * elo_expected(1216.0, 1184.0), abs=1e-12)
    assert -2.0 < seq["a"] - 1200.0 < 0.0
    assert seq["a"] + seq["b"] == pytest.approx(2400.0, abs=1e-9)


def test_pfsp_examples():
    np.testing.assert_allclose(pfsp_weights([0.5, 1.0, 0.0], 2), [0.2, 0.0, 0.8])
    np.testing.assert_allclose(pfsp_weights([1.0, 1.0], 2), [0.5, 0.5])
    np.testing.assert_allclose(pfsp_weights([0.3, 0.9, 0.1], 0), [1 / 3] * 3)
    w = pfsp_weights([1.0, 1.0, 0.2], 2)
    np.testing.assert_allclose(w, [0.0, 0.0, 1.0])
    with pytest.raises(ContractError):
        pfsp_weights([1.2])


def test_pfsp_opponents_from_matrix():
    P = PayoffMatrix(["main", "x", "y"])
    for _ in range(4):
        P.record("main", "x", 2, 0)
    P.record("main", "y", 0, 1)
    mix = dict(pfsp_opponents(P, "main", ["x", "y", "z"], 2.0))
    # z was never played and counts as a coin flip: weights 0, 1, 0.25
    assert mix == pytest.approx({"y": 0.8, "z": 0.2})


# ---------------------------------------------------------------------------
# payoff matrix


def test_payoff_matrix_bookkeeping():
    P = PayoffMatrix(["a", "b"])
    P.record("a", "b", 2, 1)
    P.record("b", "a", 0, 0)
    i, j = P.index("a"), P.index("b")
    assert P.score[i, j] == 0.5 and P.score[j, i] == -0.5
    assert P.goal_diff[i, j] == 0.5
    assert P.win_rate("a", "b") == 0.5
    P.add("c")
    assert ("a", "c") in P.missing_pairs() or ("c", "a") in P.missing_pairs()
    Q = PayoffMatrix.from_dict(P.to_dict())
    np.testing.assert_array_equal(Q.score, P.score)
    R = PayoffMatrix.from_score_csv(P.to_csv("score"))
    np.testing.assert_allclose(R.score, P.score)


# ---------------------------------------------------------------------------
# PSRO on matrix games


def test_psro_synthetic_rpsls():
    res = psro_synthetic(RPSLS)
    sigma = res.full_strategy(5)
    assert sorted(res.population) == [0, 1, 2, 3, 4]
    assert exploitability(RPSLS, sigma) <= 0.05
    assert best_response_value(RPSLS, sigma) <= 0.05


def test_psro_synthetic_stops_on_dominant():
    # transitive chain: each response beats the last, then the top strategy replies to itself
    M = np.array([[0, -1, -1], [1, 0, -1], [1, 1, 0]], dtype=float)
    res = psro_synthetic(M)
    assert res.population == [0, 1, 2]
    assert res.records[-1]["best_response"] == 2
    np.testing.assert_array_equal(res.full_strategy(3), [0, 0, 1])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_psro_synthetic_random_games(seed):
    M = random_antisymmetric(np.random.default_rng(seed), 6)
    res = psro_synthetic(M)
    assert best_response_value(M, res.full_strategy(6)) <= 1e-3 + 1e-12


# ---------------------------------------------------------------------------
# store


def test_store_eviction_and_lineage(tmp_path):
    s = PopulationStore(max_size=3)
    s.add("init", tags=["init"])
    s.add("a", parent="init")
    s.add("e1", parent="a", tags=["exploiter"], elo=1100.0)
    evicted = s.add("e2", parent="a", tags=["exploiter"], elo=1300.0)
    assert evicted == ["e1"]
    evicted = s.add("b", parent="a")
    assert evicted == ["e2"]
    assert s.ids == ["init", "a", "b"]
    assert s.lineage("e1") == ["a", "init"]
    with pytest.raises(ContractError):
        s.add("a")
    with pytest.raises(ContractError):
        s.add("c", parent="nobody")
    path = tmp_path / "population.json"
    s.write_manifest(str(path))
    t = PopulationStore.read_manifest(str(path))
    assert t.ids == s.ids and t.lineage("b") == ["a", "init"]


def test_store_resolves_checkpoints(tmp_path):
    s = PopulationStore()
    p = nn.init_policy(5, (4,), seed=0)
    path = tmp_path / "p.ckpt"
    nn.save_checkpoint(path, p)
    s.add("p", checkpoint=str(path))
    assert s.resolve("p").digest() == p.digest()


# ---------------------------------------------------------------------------
# environment-backed loops (tiny budgets)


def _tiny_train(iterations=2):
    return TrainConfig(sim=SimConfig(players_per_team=2, episode_length=40), hidden=(16, 16), workers=2,
                       batch_size=2, iterations=iterations, seed=0)


def test_psro_run_smoke(tmp_path):
    cfg = PsroConfig(generations=2, eval_episodes=2, seed=1)
    res = psro_run(cfg, _tiny_train(), checkpoint_dir=str(tmp_path))
    assert res.population == ["random", "psro_1", "psro_2"]
    assert res.store.get("psro_2").parent == "psro_1"
    assert res.payoff.missing_pairs() == []
    assert (tmp_path / "psro_1").is_dir()
    assert res.records[-1]["generation"] == "final"


def test_psro_first_response_beats_random():
    # a compact one-a-side pitch keeps the random opponent within reach of a short training budget;
    # sync training and seeded evaluation make the Monte Carlo estimate reproducible
    sim = SimConfig(players_per_team=2, episode_length=200, pitch_half_length=0.5, pitch_half_width=0.3,
                    box_depth=0.15, box_half_width=0.15, shot_range=0.3)
    reward = RewardSpec.from_dict({"team_goal": 1, "ball_position": 2, "hold_ball": 3, "gain_ball": 0.1,
                                   "lose_ball": 0.1, "shot_reward": 1})
    train = TrainConfig(sim=sim, hidden=(64, 64), encoder="enhanced", workers=4, batch_size=4, iterations=200,
                        seed=0, reward=reward)
    res = psro_run(PsroConfig(generations=1, inherit=False, eval_episodes=20, seed=3), train)
    P = res.payoff
    assert res.population == ["random", "psro_1"]
    assert P.score[P.index("psro_1"), P.index("random")] > 0


def test_league_smoke():
    store = PopulationStore()
    store.add("main_0", nn.init_policy(_tiny_train().init_params().input_dim, (16, 16), seed=1), tags=["main"])
    store.add("random", tags=["init"])
    cfg = LeagueConfig(generations=2, main_init="main_0", main_iterations=1, exploiter_iterations=1,
                       eval_episodes=2)
    res = league_run(cfg, _tiny_train(), store)
    assert res.main_ids == ["main_1", "main_2"]
    for rec in res.records:
        assert rec["exploiter_opponents"] == [(rec["main_id"], 1.0)]
    assert store.get("main_2").parent == "main_1"
    with pytest.raises(ContractError):
        league_run(LeagueConfig(main_init="ghost"), _tiny_train(), store)


def test_pipeline_smoke(tmp_path):
    specs = [("offense", RewardSpec.from_dict({"team_goal": 1, "shot_reward": 0.2})),
             ("defense", RewardSpec.from_dict({"team_goal": {"weight": 0.5, "neg": 1}, "gain_ball": 0.1}))]
    budgets = PipelineBudgets(stage1_generations=1, stage1_iterations=1, stage2_iterations=1,
                              stage3_generations=1, main_iterations=1, exploiter_iterations=1, eval_episodes=2)
    out = three_stage_pipeline(specs, _tiny_train(), budgets, checkpoint_dir=str(tmp_path))
    assert len(out.winners) == 2
    tags = [set(out.store.get(w).tags) for w in out.winners]
    assert "stage1:offense" in tags[0] and "stage1:defense" in tags[1]
    assert out.stage2_records[0]["opponent"] == out.winners[1]
    assert out.league is not None and out.league.main_ids == ["main_1"]
    with pytest.raises(ContractError):
        three_stage_pipeline(specs[:1], _tiny_train(), budgets)
