import json
import os

import numpy as np
import pytest

from harness import run_artifact_hashes
from minifoot import nn
from minifoot.env import encoder_dim
from minifoot.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_OK, main

TINY = ["--set", "sim.players_per_team=2", "--set", "sim.episode_length=40", "--set", "hidden=[16,16]",
        "--set", "iterations=2", "--workers", "2", "--batch-size", "2"]


def _read_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f]


def test_train_writes_run_directory(tmp_path):
    assert main(["train", *TINY, "--set", "checkpoint_every=1", "--name", "t", "--out", str(tmp_path)]) == EXIT_OK
    run = tmp_path / "t"
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["command"] == "train" and manifest["seeds"] == [0]
    assert manifest["config"]["iterations"] == 2
    stats = _read_jsonl(run / "stats.jsonl")
    assert [s["iteration"] for s in stats] == [0, 1]
    ckpts = sorted(os.listdir(run / "policies" / "main"))
    assert ckpts == ["000001.ckpt", "000002.ckpt"]
    assert json.loads((run / "timing.json").read_text())["train"]
    assert "stats.jsonl" in manifest["artifacts"]


def test_train_multiple_seeds(tmp_path):
    assert main(["train", *TINY, "--set", "iterations=1", "--seeds", "2", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "train" / "summary.json").read_text())
    assert [s["seed"] for s in summary] == [0, 1]
    assert (tmp_path / "train" / "seed_1" / "stats.jsonl").is_file()


def test_train_is_reproducible(tmp_path):
    code_a, a = run_artifact_hashes(main, ["train", *TINY, "--set", "checkpoint_every=1"], tmp_path / "a")
    code_b, b = run_artifact_hashes(main, ["train", *TINY, "--set", "checkpoint_every=1"], tmp_path / "b")
    assert code_a == code_b == EXIT_OK
    assert a == b and any(k.endswith(".ckpt") for k in a)


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["train", "--set", "warp=9", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "warp" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_eval_writes_report(tmp_path):
    out = tmp_path / "runs"
    assert main(["eval", "bot:1", "random", *TINY, "--episodes", "2", "--seeds", "2", "--save-replays",
                 "--name", "e", "--out", str(out)]) == EXIT_OK
    run = out / "e"
    report = json.loads((run / "report.json").read_text())
    assert report["episodes"] == 4 and report["wins"] + report["draws"] + report["losses"] == 4
    games = _read_jsonl(run / "games.jsonl")
    assert {g["seed"] for g in games} == {0, 1}
    assert len(os.listdir(run / "replays")) == 4


def test_analyze_outputs(tmp_path):
    out = tmp_path / "runs"
    main(["eval", "bot:1", "random", *TINY, "--episodes", "2", "--save-replays", "--name", "e", "--out", str(out)])
    run = out / "e"
    ckpt_dir = tmp_path / "ckpts"
    nn.save_checkpoint(ckpt_dir / "000001.ckpt", nn.init_policy(encoder_dim("basic", 2), (8,), seed=0))
    ckpt = ckpt_dir / "000001.ckpt"
    assert main(["analyze", str(run), "--radar", "--value-trace", "--checkpoint", str(ckpt),
                 "--sweep", str(ckpt_dir)]) == EXIT_OK
    ana = run / "analysis"
    rows = (ana / "match_stats.csv").read_text().splitlines()
    assert rows[0].startswith("replay,team,goals") and len(rows) == 1 + 2 * 2
    radar = (ana / "radar.csv").read_text().splitlines()
    assert {r.split(",")[0] for r in radar[1:]} == {"bot:1", "random"}
    assert len(list(ana.glob("*.trace.jsonl"))) == 2
    assert (ana / "sweep.csv").read_text().startswith("checkpoint,")


def test_analyze_errors(tmp_path):
    assert main(["analyze", str(tmp_path / "nothing")]) == EXIT_CONFIG
    assert main(["analyze", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "r.jsonl"
    bad.write_text('{"format": "minifoot-replay"}\n{broken\n')
    assert main(["analyze", str(bad)]) == EXIT_CONFIG


def test_eval_checkpoint_mismatch(tmp_path):
    ckpt = tmp_path / "wrong.ckpt"
    nn.save_checkpoint(ckpt, nn.init_policy(7, (8,), seed=0))
    assert main(["eval", str(ckpt), "bot:1", *TINY, "--out", str(tmp_path)]) == EXIT_CHECKPOINT
    assert main(["eval", str(tmp_path / "nope.ckpt"), "bot:1", *TINY, "--out", str(tmp_path)]) == EXIT_CHECKPOINT


def test_psro_synthetic_matrix(tmp_path):
    ids = ["rock", "paper", "scissors"]
    M = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]])
    lines = ["policy," + ",".join(ids)] + [f"{n}," + ",".join(str(v) for v in row) for n, row in zip(ids, M)]
    path = tmp_path / "rps.csv"
    path.write_text("\n".join(lines) + "\n")
    assert main(["psro", "--synthetic-matrix", str(path), "--name", "s", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert summary["meta"] == pytest.approx({k: 1 / 3 for k in ids}, abs=1e-3)
    assert summary["exploitability"] <= 1e-3
    path.write_text("policy,a,b\na,0,1\nb,1,0\n")
    assert main(["psro", "--synthetic-matrix", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_population_commands_tiny(tmp_path):
    assert main(["psro", *TINY, "--set", "psro.eval_episodes=2", "--generations", "1", "--name", "p",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "p" / "payoff_score.csv").is_file()
    assert (tmp_path / "p" / "elo.csv").is_file()
    assert main(["league", "--tiny", "--generations", "1", "--name", "l", "--out", str(tmp_path)]) == EXIT_OK
    league = json.loads((tmp_path / "l" / "manifest.json").read_text())
    assert league["main_ids"] == ["main_1"] and league["exploiter_ids"] == ["exploiter_1"]
    assert main(["pipeline", "--tiny", "--name", "pl", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "pl" / "stage2.jsonl").is_file()
    assert (tmp_path / "pl" / "stage3" / "population.json").is_file()
