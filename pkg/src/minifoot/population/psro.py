"""Policy-space response oracles over a growing population."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import nn
from ..errors import ContractError, TrainingError
from ..reward import RewardSpec
from .meta import exploitability, nash_solve
from .payoff import PayoffMatrix
from .store import PopulationStore


# ---------------------------------------------------------------------------
# shared meta loop


def meta_distribution(payoff: PayoffMatrix, ids: Sequence[str]) -> Dict[str, float]:
    """Symmetric Nash mixture of the score sub-matrix over ``ids``."""
    res = nash_solve(payoff.submatrix(ids))
    return {pid: float(p) for pid, p in zip(ids, res.strategy)}


def opponent_mix(meta: Dict[str, float], floor: float = 1e-9) -> List[Tuple[str, float]]:
    kept = [(pid, p) for pid, p in meta.items() if p > floor]
    total = sum(p for _, p in kept)
    return [(pid, p / total) for pid, p in kept]


def elo_results(results: Sequence[dict]) -> List[Tuple[str, str, float]]:
    out = []
    for r in results:
        s = np.sign(r["goals_a"] - r["goals_b"])
        out.append((r["a"], r["b"], 0.5 * (s + 1.0)))
    return out


# ---------------------------------------------------------------------------
# synthetic mode: payoffs come from a fixed matrix, best responses are exact


@dataclass
class SyntheticPsroResult:
    population: List[int]
    meta: np.ndarray  # over the population, in population order
    records: List[dict]

    def full_strategy(self, n: int) -> np.ndarray:
        sigma = np.zeros(n)
        sigma[self.population] = self.meta
        return sigma


def psro_synthetic(matrix, generations: Optional[int] = None, start: int = 0) -> SyntheticPsroResult:
    """PSRO on an antisymmetric matrix game.

    Each generation solves the restricted game and adds the exact best
    response against the restricted Nash mixture. Stops when the best
    response is already in the population or after ``generations``.
    """
    M = np.asarray(matrix, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n) or not np.allclose(M, -M.T, atol=1e-12):
        raise ContractError("synthetic payoff must be an antisymmetric square matrix")
    pop = [int(start)]
    records = []
    limit = n if generations is None else generations
    res = None
    for g in range(limit + 1):
        res = nash_solve(M[np.ix_(pop, pop)])
        sigma = np.zeros(n)
        sigma[pop] = res.strategy
        payoffs = M[:, pop] @ res.strategy
        br = int(np.argmax(payoffs))  # lowest index on ties
        records.append({
            "generation": g,
            "population": list(pop),
            "meta": res.strategy.tolist(),
            "exploitability": exploitability(M, sigma),
            "best_response": br,
        })
        if br in pop or g == limit:
            break
        pop.append(br)
    return SyntheticPsroResult(pop, res.strategy, records)


# ---------------------------------------------------------------------------
# environment mode


@dataclass
class PsroConfig:
    generations: int = 3
    include_bot: bool = False
    bot_spec: str = "bot:1.0"
    inherit: bool = True
    reward: Optional[RewardSpec] = None
    stop_win_rate: float = 0.9
    eval_episodes: int = 10
    prefix: str = "psro"
    initial: Sequence[str] = ("random",)
    seed: int = 0
    population_size: Optional[int] = None


@dataclass
class PsroResult:
    store: PopulationStore
    payoff: PayoffMatrix
    population: List[str]
    records: List[dict] = field(default_factory=list)
    aborted: Optional[str] = None


def train_response(base, policy_id: str, opponents, init_params=None, seed: int = 0, reward=None,
                   resolve_policy=None, target_win_rate=None, on_iteration=None, stop_event=None):
    """Train one policy against a fixed opponent distribution. Returns the TrainResult."""
    from ..runtime.trainer import Trainer

    cfg = replace(base, opponents=list(opponents), policy_id=policy_id, seed=seed,
                  reward=reward if reward is not None else base.reward,
                  target_win_rate=target_win_rate)
    if init_params is not None:
        init_params = replace(init_params, version=0)
    trainer = Trainer(cfg, init_params=init_params, resolve_policy=resolve_policy,
                      on_iteration=on_iteration, stop_event=stop_event)
    return trainer.run()


def _checkpoint(store: PopulationStore, pid: str, params, directory: Optional[str]) -> None:
    if directory is None:
        return
    path = os.path.join(directory, pid, f"{params.version:06d}.ckpt")
    nn.save_checkpoint(path, params, {"policy_id": pid})
    store.get(pid).checkpoint = path


def psro_run(config: PsroConfig, train_config, store: Optional[PopulationStore] = None,
             payoff: Optional[PayoffMatrix] = None, extra_policies: Sequence[Tuple[str, object]] = (),
             checkpoint_dir: Optional[str] = None, on_generation: Optional[Callable] = None,
             stop_event=None) -> PsroResult:
    """PSRO with environment episodes.

    ``train_config`` (a runtime ``TrainConfig``) supplies simulation, PPO
    settings and the per-generation iteration budget. The population starts
    from ``config.initial`` (scripted specs) plus ``extra_policies``; with
    ``include_bot`` the benchmark bot joins and generation 1 trains against
    it alone.
    """
    from ..runtime.evaluation import evaluation_manager

    store = store if store is not None else PopulationStore(config.population_size)
    payoff = payoff if payoff is not None else PayoffMatrix()
    reward = config.reward if config.reward is not None else train_config.reward
    population: List[str] = []

    def admit(pid, params=None, **kw):
        if pid not in store:
            store.add(pid, params, **kw)
        if pid not in payoff:
            payoff.add(pid)
        population.append(pid)

    for spec in config.initial:
        admit(spec, tags=["init"])
    for pid, params in extra_policies:
        admit(pid, params, tags=["init"])
    if config.include_bot and config.bot_spec not in population:
        admit(config.bot_spec, tags=["bot"])
    if not population:
        raise ContractError("initial population is empty")

    def evaluate(new_ids):
        pairs = [(a, b) for a in new_ids for b in population if a != b and (b not in new_ids or a < b)]
        rep = evaluation_manager(population, config.eval_episodes, train_config.sim, payoff,
                                 resolve_policy=store.resolve, seed=config.seed, encoder=train_config.encoder,
                                 pairs=pairs)
        store.update_elo(elo_results(rep.results))
        return rep

    evaluate(list(population))
    result = PsroResult(store, payoff, population)
    previous = None
    for g in range(config.generations):
        if stop_event is not None and stop_event.is_set():
            break
        meta = meta_distribution(payoff, population)
        if g == 0 and config.include_bot:
            opponents = [(config.bot_spec, 1.0)]
        else:
            opponents = opponent_mix(meta)
        pid = f"{config.prefix}_{g + 1}"
        init = store.resolve(previous) if (config.inherit and previous is not None) else None
        outcome = None
        for attempt in range(2):
            try:
                outcome = train_response(
                    train_config, pid, opponents, init_params=init, seed=config.seed + 7919 * (g + 1) + attempt,
                    reward=reward, resolve_policy=store.resolve, target_win_rate=config.stop_win_rate,
                    stop_event=stop_event,
                )
                break
            except TrainingError as exc:
                if attempt == 1:
                    result.aborted = f"generation {g + 1}: {exc}"
        if outcome is None:
            break
        admit(pid, outcome.params, generation=g + 1, parent=previous if init is not None else None,
              reward=reward.to_dict(), tags=["br"])
        _checkpoint(store, pid, outcome.params, checkpoint_dir)
        rep = evaluate([pid])
        previous = pid
        record = {
            "generation": g + 1,
            "policy_id": pid,
            "opponents": opponents,
            "meta": meta,
            "train_iterations": len(outcome.history),
            "train_win_rate": outcome.win_rate(train_config.win_window),
            "reached_target": outcome.reached_target,
            "failed_updates": sum(1 for h in outcome.history if h.get("aborted")),
            "elo": store.ratings(),
            "skipped_pairs": [list(s) for s in rep.skipped],
        }
        result.records.append(record)
        if on_generation is not None:
            on_generation(record, result)
    final_meta = meta_distribution(payoff, population)
    result.records.append({"generation": "final", "meta": final_meta, "elo": store.ratings(),
                           "exploitability": exploitability(payoff.submatrix(population),
                                                            np.array([final_meta[p] for p in population]))})
    return result
