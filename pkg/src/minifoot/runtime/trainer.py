"""Actor/learner loop: rollout workers feed the data server, one trainer consumes."""
from __future__ import annotations

import collections
import concurrent.futures
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import nn
from ..env import SimConfig, encoder_dim
from ..errors import ConfigError, TrainingError
from ..ippo import PpoConfig, SampleBatch, attach_gae, ppo_update
from ..reward import RewardSpec
from .rollout import DEFAULT_SAMPLE_LENGTH, RolloutTask, RolloutWorker, episode_rng
from .servers import DataServer, PolicyServer
from .timing import PhaseTimer

# key used to derive the trainer's shuffling stream from the run seed
_TRAINER_STREAM = 1_000_003


@dataclass
class TrainConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reward: RewardSpec = field(default_factory=lambda: RewardSpec([("team_goal", 1.0)]))
    opponents: List[Tuple[str, float]] = field(default_factory=lambda: [("bot:1.0", 1.0)])
    encoder: str = "basic"
    hidden: Tuple[int, ...] = nn.DEFAULT_HIDDEN
    workers: int = 8
    batch_size: int = 8
    sample_length: int = DEFAULT_SAMPLE_LENGTH
    capacity: int = 1000
    iterations: int = 500
    seed: int = 0
    mode: str = "sync"
    target_win_rate: Optional[float] = None
    win_window: int = 50
    policy_id: str = "main"
    feature_norm: bool = True
    popart: bool = True

    def __post_init__(self):
        if self.workers < 1 or self.batch_size < 1 or self.iterations < 0:
            raise ConfigError("workers and batch_size must be positive, iterations non-negative")
        if self.batch_size > self.capacity:
            raise ConfigError("batch_size cannot exceed the data server capacity")
        if self.mode not in ("sync", "async"):
            raise ConfigError("mode must be 'sync' or 'async'")
        if self.win_window < 1:
            raise ConfigError("win_window must be positive")

    def task(self) -> RolloutTask:
        return RolloutTask(
            policy_id=self.policy_id,
            opponents=list(self.opponents),
            sim_config=self.sim,
            reward_spec=self.reward,
            encoder=self.encoder,
            sample_length=self.sample_length,
        )

    def init_params(self) -> nn.PolicyParams:
        return nn.init_policy(
            encoder_dim(self.encoder, self.sim.players_per_team), self.hidden, seed=self.seed,
            feature_norm=self.feature_norm, popart=self.popart,
        )


@dataclass
class TrainResult:
    params: nn.PolicyParams
    history: List[dict]
    episodes: List[dict]
    timing: Dict[str, dict]
    counters: Dict[str, int]
    reached_target: bool = False

    def win_rate(self, window: int = 50) -> float:
        return window_win_rate(self.episodes, window)


def window_win_rate(episodes: Sequence[dict], window: int) -> float:
    recent = list(episodes)[-window:]
    if not recent:
        return 0.0
    return sum(1 for e in recent if e["outcome"] > 0) / len(recent)


class Trainer:
    """IPPO training of one policy id against a fixed opponent distribution.

    ``mode="sync"`` is the reproducible schedule: iteration k plays rounds
    of ``workers`` concurrent episodes with snapshot k (episode seeds derived
    from ``(seed, k, worker, round)``) until ``batch_size`` segments are
    queued, then trains on every queued segment in worker order.
    ``mode="async"`` runs free-running worker threads that refresh their
    snapshot at episode boundaries while the trainer pulls ``batch_size``
    segments at a time.
    """

    def __init__(self, config: TrainConfig, init_params: Optional[nn.PolicyParams] = None,
                 policy_server: Optional[PolicyServer] = None, resolve_policy: Optional[Callable] = None,
                 on_iteration: Optional[Callable] = None, stop_event: Optional[threading.Event] = None):
        self.config = config
        self.policy_server = policy_server or PolicyServer()
        self.resolve_policy = resolve_policy
        self.on_iteration = on_iteration
        self.stop_event = stop_event or threading.Event()
        params = init_params if init_params is not None else config.init_params()
        if config.policy_id in self.policy_server:
            current = self.policy_server.get(config.policy_id)
            if params.version <= current.version:
                params = replace(params, version=current.version + 1)
        self.policy_server.publish(config.policy_id, params)
        self.params = params
        self.adam = nn.AdamState.create(params.arrays(), lr=config.ppo.lr, eps=config.ppo.adam_eps)
        self.data_server = DataServer(config.capacity)
        self.rollout_timer = PhaseTimer()
        self.train_timer = PhaseTimer()
        self.episodes: List[dict] = []
        self.history: List[dict] = []
        self._episodes_lock = threading.Lock()
        self.env_steps = 0
        self.failed_updates = 0

    # -- helpers --------------------------------------------------------------
    def _record_episode(self, stats: dict) -> None:
        with self._episodes_lock:
            self.episodes.append(stats)
            self.env_steps += stats["steps"]

    def _make_worker(self, w: int) -> RolloutWorker:
        return RolloutWorker(
            self.config.task(), self.data_server, self.policy_server, worker_id=w, seed=self.config.seed,
            resolve_policy=self.resolve_policy, stats_sink=self._record_episode, timer=self.rollout_timer,
        )

    def _train_on(self, segments, iteration: int) -> dict:
        cfg = self.config
        with self.train_timer.phase("batch_assembly"):
            batch = SampleBatch.concat([s.batch for s in segments])
        with self.train_timer.phase("forward"):
            batch = attach_gae(batch, self.params, cfg.ppo)
        rng = episode_rng(cfg.seed, _TRAINER_STREAM, iteration)
        new_params, new_adam, stats = ppo_update(batch, self.params, self.adam, cfg.ppo, rng, self.train_timer)
        if stats.get("aborted"):
            self.failed_updates += 1
        else:
            self.params, self.adam = new_params, new_adam
            self.policy_server.publish(cfg.policy_id, self.params)
        stats["segments"] = len(segments)
        stats["staleness"] = float(np.mean([self.params.version - 1 - s.version for s in segments])) if not stats.get("aborted") else None
        return stats

    def _iteration_record(self, k: int, stats: dict, t0: float) -> dict:
        cfg = self.config
        with self._episodes_lock:
            eps = list(self.episodes)
        recent = eps[-cfg.win_window:]
        rec = {
            "iteration": k,
            "version": self.params.version,
            "env_steps": int(sum(e["steps"] for e in eps)),
            "episodes": len(eps),
            "win_rate": window_win_rate(eps, cfg.win_window),
            "goals_for": float(np.mean([e["goals_for"] for e in recent])) if recent else 0.0,
            "goals_against": float(np.mean([e["goals_against"] for e in recent])) if recent else 0.0,
        }
        for key in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction",
                    "explained_variance", "value_mean", "return_mean", "epochs", "aborted", "samples", "segments"):
            if key in stats:
                rec[key] = stats[key]
        totals: Dict[str, float] = {}
        for e in recent:
            for name, val in e.get("reward_totals", {}).items():
                totals[name] = totals.get(name, 0.0) + val / len(recent)
        rec["reward_totals"] = totals
        return rec

    def _target_reached(self) -> bool:
        cfg = self.config
        if cfg.target_win_rate is None:
            return False
        with self._episodes_lock:
            if len(self.episodes) < cfg.win_window:
                return False
            return window_win_rate(self.episodes, cfg.win_window) >= cfg.target_win_rate

    # -- main loops -------------------------------------------------------------
    def run(self) -> TrainResult:
        if self.config.mode == "sync":
            reached = self._run_sync()
        else:
            reached = self._run_async()
        return TrainResult(
            params=self.params,
            history=self.history,
            episodes=list(self.episodes),
            timing={"rollout": self.rollout_timer.report(), "train": self.train_timer.report()},
            counters=self.data_server.counters(),
            reached_target=reached,
        )

    def _run_sync(self) -> bool:
        cfg = self.config
        workers = [self._make_worker(w) for w in range(cfg.workers)]
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
        try:
            for k in range(cfg.iterations):
                if self.stop_event.is_set():
                    return False
                t0 = time.perf_counter()
                params = self.params
                rnd = 0
                while len(self.data_server) < cfg.batch_size:
                    jobs = []
                    for w, worker in enumerate(workers):
                        ep = (k * 1_000 + rnd) * cfg.workers + w
                        rng = episode_rng(cfg.seed, k, w, rnd)
                        if pool is None:
                            jobs.append(worker.run_episode(ep, params, rng))
                        else:
                            jobs.append(pool.submit(worker.run_episode, ep, params, rng))
                    results = [j if pool is None else j.result() for j in jobs]
                    for segments, stats in results:
                        if segments is None:
                            continue
                        for seg in segments:
                            self.data_server.push(seg)
                        self._record_episode(stats)
                    rnd += 1
                segments = self.data_server.drain()
                stats = self._train_on(segments, k)
                rec = self._iteration_record(k, stats, t0)
                self.history.append(rec)
                if self.on_iteration is not None:
                    self.on_iteration(k, self.params, rec)
                if self._target_reached():
                    return True
            return False
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
            self.data_server.shutdown()

    def _run_async(self) -> bool:
        cfg = self.config
        workers = [self._make_worker(w) for w in range(cfg.workers)]
        threads = [threading.Thread(target=wk.loop, name=f"rollout-{w}", daemon=True) for w, wk in enumerate(workers)]
        for th in threads:
            th.start()
        reached = False
        try:
            for k in range(cfg.iterations):
                if self.stop_event.is_set():
                    break
                t0 = time.perf_counter()
                segments = []
                while not segments:
                    segments = self.data_server.pull(cfg.batch_size, timeout=1.0)
                    if self.stop_event.is_set():
                        break
                    if not segments and not any(th.is_alive() for th in threads):
                        raise TrainingError("all rollout workers exited")
                if not segments:
                    break
                stats = self._train_on(segments, k)
                rec = self._iteration_record(k, stats, t0)
                self.history.append(rec)
                if self.on_iteration is not None:
                    self.on_iteration(k, self.params, rec)
                if self._target_reached():
                    reached = True
                    break
        finally:
            for wk in workers:
                wk.stop()
            self.data_server.shutdown()
            for th in threads:
                th.join(timeout=60)
        return reached


def train(config: TrainConfig, **kwargs) -> TrainResult:
    return Trainer(config, **kwargs).run()
