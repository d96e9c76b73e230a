"""Command line front-end: ``minifoot {train,psro,league,pipeline,eval,analyze}``.

Exit codes: 0 success, 2 invalid configuration or input, 3 training
error (partial artifacts are kept), 4 checkpoint mismatch. Run directories
live under ``--out``, defaulting to ``$MINIFOOT_RUNS`` or ``./runs``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import threading
import time
from typing import List, Optional

import numpy as np

from . import __version__, nn
from . import config as runcfg
from .errors import CheckpointError, ConfigError, ContractError, ReplayParseError, TrainingError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_CHECKPOINT = 4
RUNS_ENV = "MINIFOOT_RUNS"


# ---------------------------------------------------------------------------
# run directory helpers


def default_root() -> str:
    return os.environ.get(RUNS_ENV, "runs")


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


class RunDir:
    """``<root>/<name>/{manifest.json, stats.jsonl, policies/<id>/<version>.ckpt, ...}``."""

    def __init__(self, root: str, name: str, command: str, cfg: runcfg.RunConfig, seeds: List[int]):
        self.path = os.path.join(root, name)
        os.makedirs(self.path, exist_ok=True)
        self.manifest = {
            "name": name,
            "command": command,
            "config": cfg.snapshot(),
            "seeds": seeds,
            "version": __version__,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "finished": None,
            "status": "running",
            "artifacts": [],
        }
        self._write_manifest()

    def file(self, *parts) -> str:
        p = os.path.join(self.path, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def artifact(self, rel: str) -> None:
        if rel not in self.manifest["artifacts"]:
            self.manifest["artifacts"].append(rel)

    def write_text(self, rel: str, text: str) -> None:
        _atomic_write(self.file(rel), text)
        self.artifact(rel)

    def save_policy(self, policy_id: str, params, prefix: str = "") -> str:
        rel = os.path.join(prefix + "policies", policy_id, f"{params.version:06d}.ckpt")
        nn.save_checkpoint(self.file(rel), params, {"policy_id": policy_id})
        self.artifact(rel)
        return rel

    def finish(self, status: str, **extra) -> None:
        self.manifest.update(extra)
        self.manifest["status"] = status
        self.manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        self._write_manifest()

    def _write_manifest(self) -> None:
        _atomic_write(os.path.join(self.path, "manifest.json"), json.dumps(self.manifest, indent=2, sort_keys=True,
                                                                           default=_json_default) + "\n")


class JsonLines:
    def __init__(self, path: str):
        self.fh = open(path, "w")

    def write(self, rec: dict) -> None:
        self.fh.write(_dumps(rec) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def _config(args) -> runcfg.RunConfig:
    flags = {}
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        flags["workers"] = args.workers
    if getattr(args, "batch_size", None) is not None:
        flags["batch_size"] = args.batch_size
    return runcfg.load(args.config, args.set or [], **flags)


def _run_name(args, cfg: runcfg.RunConfig, command: str) -> str:
    return args.name or cfg.train.get("name") or command


def _interruptible(fn, stop_event: threading.Event):
    """Run ``fn`` turning Ctrl-C into a cooperative stop request."""
    try:
        return fn()
    except KeyboardInterrupt:
        stop_event.set()
        raise


# ---------------------------------------------------------------------------
# train


def _train_one(cfg: runcfg.RunConfig, run: RunDir, seed: int, prefix: str = "") -> dict:
    from .runtime.trainer import Trainer

    tc = cfg.train_config(seed)
    every = int(cfg.train.get("checkpoint_every") or 0)
    stats = JsonLines(run.file(prefix + "stats.jsonl"))
    run.artifact(prefix + "stats.jsonl")

    def on_iteration(k, params, rec):
        stats.write(rec)
        if every and (k + 1) % every == 0:
            run.save_policy(tc.policy_id, params, prefix)

    stop = threading.Event()
    trainer = Trainer(tc, on_iteration=on_iteration, stop_event=stop)
    try:
        result = trainer.run()
    except KeyboardInterrupt:
        stop.set()
        run.save_policy(tc.policy_id, trainer.params, prefix)
        stats.close()
        raise
    finally:
        if not stats.fh.closed:
            stats.close()
    final = run.save_policy(tc.policy_id, result.params, prefix)
    run.write_text(prefix + "timing.json", json.dumps(result.timing, indent=2, sort_keys=True) + "\n")
    summary = {
        "seed": seed,
        "iterations": len(result.history),
        "reached_target": result.reached_target,
        "win_rate": result.win_rate(tc.win_window),
        "episodes": len(result.episodes),
        "env_steps": int(sum(e["steps"] for e in result.episodes)),
        "final_checkpoint": final,
        "failed_updates": trainer.failed_updates,
        "counters": result.counters,
    }
    if trainer.failed_updates and trainer.failed_updates == len(result.history) and result.history:
        raise TrainingError("every update was aborted (non-finite loss)", summary)
    return summary


def cmd_train(args) -> int:
    cfg = _config(args)
    seeds_n = args.seeds or cfg.train.get("seeds") or 1
    base = int(cfg.train.get("seed", 0))
    seeds = [base + i for i in range(int(seeds_n))]
    run = RunDir(args.out or default_root(), _run_name(args, cfg, "train"), "train", cfg, seeds)
    summaries = []
    try:
        for s in seeds:
            prefix = "" if len(seeds) == 1 else f"seed_{s}/"
            summaries.append(_train_one(cfg, run, s, prefix))
    except TrainingError as exc:
        run.finish("failed", error=str(exc), summaries=summaries)
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except KeyboardInterrupt:
        run.finish("interrupted", summaries=summaries)
        return 130
    run.write_text("summary.json", json.dumps(summaries, indent=2, sort_keys=True, default=_json_default) + "\n")
    run.finish("ok", summaries=summaries)
    print(run.path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# population commands


def _write_population(run: RunDir, store, payoff, records, prefix: str = "") -> None:
    run.write_text(prefix + "population.json", json.dumps(store.to_dict(), indent=2, sort_keys=True,
                                                          default=_json_default) + "\n")
    run.write_text(prefix + "payoff_score.csv", payoff.to_csv("score"))
    run.write_text(prefix + "payoff_goal_diff.csv", payoff.to_csv("goal_diff"))
    run.write_text(prefix + "payoff_counts.csv", payoff.to_csv("counts"))
    run.write_text(prefix + "generations.jsonl", "".join(_dumps(r) + "\n" for r in records))
    # long-format curves: one row per (generation, policy)
    elo_rows, meta_rows = [], []
    for r in records:
        g = r.get("generation")
        for pid, v in sorted((r.get("elo") or {}).items()):
            elo_rows.append((g, pid, v))
        for pid, v in sorted((r.get("meta") or {}).items()):
            meta_rows.append((g, pid, v))
    run.write_text(prefix + "elo.csv", _csv(["generation", "policy", "elo"], elo_rows))
    run.write_text(prefix + "meta.csv", _csv(["generation", "policy", "probability"], meta_rows))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def cmd_psro(args) -> int:
    from .population import PayoffMatrix, PsroConfig, exploitability, psro_run, psro_synthetic

    cfg = _config(args)
    seed = int(cfg.train.get("seed", 0))
    p = dict(cfg.sections["psro"])
    if args.generations is not None:
        p["generations"] = args.generations
    if args.include_bot:
        p["include_bot"] = True
    run = RunDir(args.out or default_root(), _run_name(args, cfg, "psro"), "psro", cfg, [seed])

    if args.synthetic_matrix:
        try:
            with open(args.synthetic_matrix) as f:
                table = PayoffMatrix.from_score_csv(f.read())
        except (OSError, ContractError) as exc:
            run.finish("failed", error=str(exc))
            print(f"invalid matrix: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        res = psro_synthetic(table.score, p.get("generations"))
        ids = table.ids
        records = [{**r, "population": [ids[i] for i in r["population"]],
                    "best_response": ids[r["best_response"]],
                    "meta": {ids[i]: m for i, m in zip(r["population"], r["meta"])}} for r in res.records]
        run.write_text("generations.jsonl", "".join(_dumps(r) + "\n" for r in records))
        final = res.full_strategy(len(ids))
        summary = {"population": [ids[i] for i in res.population],
                   "meta": {ids[i]: float(final[i]) for i in range(len(ids))},
                   "exploitability": exploitability(table.score, final)}
        run.write_text("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        run.finish("ok", summary=summary)
        print(run.path)
        return EXIT_OK

    tc = cfg.train_config(seed)
    pc = PsroConfig(reward=cfg.reward_spec(), seed=seed, **p)
    stop = threading.Event()
    gen_log = JsonLines(run.file("generations.live.jsonl"))
    try:
        res = psro_run(pc, tc, checkpoint_dir=os.path.join(run.path, "policies"),
                       on_generation=lambda rec, _: gen_log.write(rec), stop_event=stop)
    except TrainingError as exc:
        run.finish("failed", error=str(exc))
        return EXIT_TRAINING
    except KeyboardInterrupt:
        stop.set()
        run.finish("interrupted")
        return 130
    finally:
        gen_log.close()
    os.remove(run.file("generations.live.jsonl"))
    _write_population(run, res.store, res.payoff, res.records)
    run.finish("ok" if res.aborted is None else "failed", aborted=res.aborted)
    print(run.path)
    return EXIT_OK if res.aborted is None else EXIT_TRAINING


def _tiny(cfg: runcfg.RunConfig) -> runcfg.RunConfig:
    """Smoke-test budgets layered under the user's explicit settings."""
    values = {
        "sim.players_per_team": 2, "sim.episode_length": 60, "workers": 2, "batch_size": 2, "iterations": 2,
        "hidden": [16, 16], "league.main_iterations": 1, "league.exploiter_iterations": 1,
        "league.eval_episodes": 2, "psro.eval_episodes": 2, "pipeline.stage1_generations": 1,
        "pipeline.stage1_iterations": 1, "pipeline.stage2_iterations": 1, "pipeline.stage3_generations": 1,
        "pipeline.main_iterations": 1, "pipeline.exploiter_iterations": 1, "pipeline.eval_episodes": 2,
    }
    values.update(cfg.raw)
    return runcfg.build(values)


def cmd_league(args) -> int:
    from .population import LeagueConfig, PopulationStore, league_run

    cfg = _config(args)
    if args.tiny:
        cfg = _tiny(cfg)
    seed = int(cfg.train.get("seed", 0))
    lc = dict(cfg.sections["league"])
    if args.generations is not None:
        lc["generations"] = args.generations
    run = RunDir(args.out or default_root(), _run_name(args, cfg, "league"), "league", cfg, [seed])
    tc = cfg.train_config(seed)
    store = PopulationStore(lc.pop("population_size", None))
    try:
        if args.main_init:
            init = nn.load_checkpoint(args.main_init, expect_input_dim=tc.init_params().input_dim)
        else:
            init = tc.init_params()
    except CheckpointError as exc:
        run.finish("failed", error=str(exc))
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    store.add("main_0", init, tags=["main", "init"])
    run.save_policy("main_0", init)
    store.add("random", tags=["init"])
    pool = []
    for k, path in enumerate(args.exploiter_init or []):
        try:
            params = nn.load_checkpoint(path, expect_input_dim=init.input_dim)
        except CheckpointError as exc:
            run.finish("failed", error=str(exc))
            return EXIT_CHECKPOINT
        store.add(f"init_{k}", params, tags=["init"])
        pool.append(f"init_{k}")
    cfg_l = LeagueConfig(main_init="main_0", exploiter_pool=pool, reward=cfg.reward_spec(), seed=seed, **lc)
    try:
        res = league_run(cfg_l, tc, store, checkpoint_dir=os.path.join(run.path, "policies"))
    except TrainingError as exc:
        run.finish("failed", error=str(exc))
        return EXIT_TRAINING
    _write_population(run, res.store, res.payoff, res.records)
    run.finish("ok" if res.aborted is None else "failed", aborted=res.aborted, main_ids=res.main_ids,
               exploiter_ids=res.exploiter_ids)
    print(run.path)
    return EXIT_OK if res.aborted is None else EXIT_TRAINING


DEFAULT_PIPELINE_SPECS = {
    "offense": {"team_goal": {"weight": 1.0, "neg": 0.2}, "individual_goal": 0.2, "shot_reward": 0.2,
                "ball_position": 1.0},
    "defense": {"team_goal": {"weight": 0.5, "neg": 1.0}, "gain_ball": 0.1, "lose_ball": 0.1, "min_distance": 0.01},
}


def cmd_pipeline(args) -> int:
    from .population import PipelineBudgets, three_stage_pipeline
    from .reward import RewardSpec

    cfg = _config(args)
    if args.tiny:
        cfg = _tiny(cfg)
    seed = int(cfg.train.get("seed", 0))
    specs_raw = cfg.sections.get("specs") or DEFAULT_PIPELINE_SPECS
    try:
        specs = [(name, RewardSpec.from_dict(d)) for name, d in sorted(specs_raw.items())]
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(specs) < 2:
        print("invalid config: the pipeline needs at least two reward specs", file=sys.stderr)
        return EXIT_CONFIG
    budgets = PipelineBudgets(**cfg.sections["pipeline"])
    run = RunDir(args.out or default_root(), _run_name(args, cfg, "pipeline"), "pipeline", cfg, [seed])
    tc = cfg.train_config(seed)
    try:
        res = three_stage_pipeline(specs, tc, budgets, seed=seed, checkpoint_dir=os.path.join(run.path, "policies"))
    except TrainingError as exc:
        run.finish("failed", error=str(exc))
        return EXIT_TRAINING
    for k, (name, _) in enumerate(specs):
        s1 = res.stage1[k]
        _write_population(run, res.store, s1.payoff, s1.records, prefix=f"stage1_{name}/")
    run.write_text("stage2.jsonl", "".join(_dumps(r) + "\n" for r in res.stage2_records))
    _write_population(run, res.store, res.league.payoff, res.league.records, prefix="stage3/")
    run.finish("ok", winners=res.winners, representatives=res.representatives, main_ids=res.league.main_ids)
    print(run.path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _load_side(spec: str, expect_dim: int, encoder: str, greedy: bool):
    from .runtime.controllers import PolicyController, is_scripted_spec, parse_opponent

    if is_scripted_spec(spec):
        return parse_opponent(spec, None, encoder)
    params = nn.load_checkpoint(spec, expect_input_dim=expect_dim)
    return PolicyController(params, encoder=encoder, greedy=greedy, name=spec)


def cmd_eval(args) -> int:
    from .env import encoder_dim
    from .runtime.evaluation import play_pair

    cfg = _config(args)
    tc = cfg.train_config()
    ev = cfg.sections["eval"]
    episodes = args.episodes or ev.get("episodes", 10)
    dim = encoder_dim(tc.encoder, tc.sim.players_per_team)
    try:
        a = _load_side(args.policy_a, dim, tc.encoder, ev.get("greedy", False))
        b = _load_side(args.policy_b, dim, tc.encoder, ev.get("greedy", False))
    except (CheckpointError, FileNotFoundError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    seeds = [tc.seed + i for i in range(args.seeds or 1)]
    run = RunDir(args.out or default_root(), _run_name(args, cfg, "eval"), "eval", cfg, seeds)
    games = []
    for s in seeds:
        for g in play_pair(tc.sim, a, b, episodes, s, keep_replays=args.save_replays):
            g.update(seed=s, policy_a=args.policy_a, policy_b=args.policy_b)
            if args.save_replays:
                rel = os.path.join("replays", f"seed{s}_ep{g['episode']:04d}.jsonl")
                g["replay"].write(run.file(rel))
                run.artifact(rel)
                g["replay_file"] = rel
            g.pop("replay", None)
            games.append(g)
    wins = sum(1 for g in games if g["goals_a"] > g["goals_b"])
    losses = sum(1 for g in games if g["goals_a"] < g["goals_b"])
    gd = [g["goals_a"] - g["goals_b"] for g in games]
    score = [float(np.sign(x)) for x in gd]
    report = {
        "policy_a": args.policy_a,
        "policy_b": args.policy_b,
        "episodes": len(games),
        "wins": wins,
        "draws": len(games) - wins - losses,
        "losses": losses,
        "mean_score": float(np.mean(score)) if games else 0.0,
        "score_stderr": float(np.std(score, ddof=1) / np.sqrt(len(score))) if len(score) > 1 else 0.0,
        "mean_goal_diff": float(np.mean(gd)) if games else 0.0,
    }
    run.write_text("games.jsonl", "".join(_dumps(g) + "\n" for g in games))
    run.write_text("report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    run.finish("ok", report=report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _replay_files(path: str) -> List[str]:
    if os.path.isfile(path):
        return [path]
    out = []
    for root, _, files in os.walk(path):
        out.extend(os.path.join(root, f) for f in files if f.endswith(".jsonl") and _is_replay(os.path.join(root, f)))
    return sorted(out)


def _is_replay(path: str) -> bool:
    try:
        with open(path) as f:
            head = json.loads(f.readline() or "{}")
        return isinstance(head, dict) and head.get("format") == "minifoot-replay"
    except (OSError, ValueError):
        return False


def _policy_labels(files: List[str]) -> dict:
    """Map replay path -> (left label, right label) using eval ``games.jsonl`` files when present."""
    labels = {}
    run_dirs = {os.path.dirname(os.path.dirname(os.path.abspath(f))) for f in files}
    for run in run_dirs:
        games = os.path.join(run, "games.jsonl")
        if not os.path.isfile(games):
            continue
        with open(games) as fh:
            for line in fh:
                g = json.loads(line)
                if "replay_file" not in g:
                    continue
                a, b = g.get("policy_a", "a"), g.get("policy_b", "b")
                left, right = (a, b) if g["a_left"] else (b, a)
                labels[os.path.join(run, g["replay_file"])] = (left, right)
    return labels


def cmd_analyze(args) -> int:
    from .analytics import (build_game_graph, checkpoint_sweep, formation_metrics, match_stats, radar_export,
                            skill_profile, trace_records, value_td_diagnostics)
    from .env.replay import Replay
    from .analytics.stats import TEAM_METRICS

    if not os.path.exists(args.path):
        print(f"no such file or directory: {args.path}", file=sys.stderr)
        return EXIT_CONFIG
    files = _replay_files(args.path)
    if not files:
        print(f"no replays found under {args.path}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or (args.path if os.path.isdir(args.path) else os.path.dirname(os.path.abspath(args.path)))
    out_dir = os.path.join(out_dir, "analysis")
    os.makedirs(out_dir, exist_ok=True)
    rows, profiles = [], {}
    labels = _policy_labels(files)
    try:
        for path in files:
            replay = Replay.read(path)
            graph = build_game_graph(replay)
            ms = match_stats(graph, replay)
            fm = formation_metrics(replay).means()
            rel = os.path.relpath(path, args.path) if os.path.isdir(args.path) else os.path.basename(path)
            for team in (0, 1):
                row = {"replay": rel, "team": team, **ms.teams[team].as_dict()}
                row.update({"eps": fm["eps"][team], "separateness": fm["separateness"][team],
                            "length_per_width": fm["length_per_width"][team]})
                rows.append(row)
                label = labels.get(os.path.abspath(path), (None, None))[team] or f"{rel}:{team}"
                profiles.setdefault(label, []).append((ms, team))
            if args.value_trace:
                tr = value_td_diagnostics(args.checkpoint, replay, args.gamma, args.lam, side=args.side)
                with open(os.path.join(out_dir, os.path.basename(path) + ".trace.jsonl"), "w") as f:
                    for rec in trace_records(tr):
                        f.write(_dumps(rec) + "\n")
    except ReplayParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    header = ["replay", "team", *TEAM_METRICS, "movement", "eps", "separateness", "length_per_width"]
    _atomic_write(os.path.join(out_dir, "match_stats.csv"), _csv(header, [[r[h] for h in header] for r in rows]))
    if args.radar:
        if len(profiles) < 2:
            print("radar needs at least two team profiles", file=sys.stderr)
            return EXIT_CONFIG
        table = radar_export({k: skill_profile(v) for k, v in profiles.items()})
        _atomic_write(os.path.join(out_dir, "radar.csv"), table)
    if args.sweep:
        replay = Replay.read(files[0])
        sweep = checkpoint_sweep(args.sweep, replay, args.gamma, args.lam, side=args.side)
        _atomic_write(os.path.join(out_dir, "sweep.csv"),
                      _csv(["checkpoint", "mean_abs_value", "max_abs_td"],
                           [[s["checkpoint"], s["mean_abs_value"], s["max_abs_td"]] for s in sweep]))
    print(out_dir)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--out", help=f"run root (default ${RUNS_ENV} or ./runs)")
    p.add_argument("--name", help="run name (default from config or the command)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minifoot", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"minifoot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="IPPO training against a fixed opponent mix")
    _common(p)
    p.add_argument("--seeds", type=int, help="run this many consecutive seeds as sub-runs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("psro", help="PSRO over a growing population")
    _common(p)
    p.add_argument("--generations", type=int)
    p.add_argument("--include-bot", action="store_true", help="add the benchmark bot as the first opponent")
    p.add_argument("--synthetic-matrix", help="CSV payoff table; runs the meta layer without episodes")
    p.set_defaults(func=cmd_psro)

    p = sub.add_parser("league", help="main agent plus exploiters")
    _common(p)
    p.add_argument("--generations", type=int)
    p.add_argument("--main-init", help="checkpoint to start the main agent from")
    p.add_argument("--exploiter-init", action="append", help="checkpoint for the exploiter init pool (repeatable)")
    p.add_argument("--tiny", action="store_true", help="smoke-test budgets")
    p.set_defaults(func=cmd_league)

    p = sub.add_parser("pipeline", help="three-stage population training")
    _common(p)
    p.add_argument("--tiny", action="store_true", help="smoke-test budgets")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="play two policies or bots against each other")
    _common(p)
    p.add_argument("policy_a", help="checkpoint path or bot spec (bot:1.0, bot:1.0:blind, random)")
    p.add_argument("policy_b")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--save-replays", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="statistics and traces from replay files")
    p.add_argument("path", help="replay file or directory")
    p.add_argument("--out")
    p.add_argument("--radar", action="store_true", help="emit a normalised skill table")
    p.add_argument("--value-trace", action="store_true", help="emit critic traces (needs --checkpoint)")
    p.add_argument("--checkpoint")
    p.add_argument("--sweep", help="directory of checkpoints to summarise on the first replay")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.95)
    p.add_argument("--side", type=int, default=0, choices=(0, 1))
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "value_trace", False) and not args.checkpoint:
        parser.error("--value-trace needs --checkpoint")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
