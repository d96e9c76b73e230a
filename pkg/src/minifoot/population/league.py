"""League training: a main agent plus per-generation exploiters."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractError, TrainingError
from ..reward import RewardSpec
from .meta import pfsp_weights
from .payoff import PayoffMatrix
from .psro import _checkpoint, elo_results, train_response
from .store import PopulationStore

# win rate assumed against opponents that were never evaluated
UNPLAYED_WIN_RATE = 0.5


@dataclass
class LeagueConfig:
    generations: int = 2
    main_init: Optional[str] = None
    exploiter_pool: Sequence[str] = ()
    pfsp_exponent: float = 2.0
    main_iterations: int = 20
    exploiter_iterations: int = 20
    exploiter_target: Optional[float] = None
    eval_episodes: int = 10
    reward: Optional[RewardSpec] = None
    seed: int = 0
    population_size: Optional[int] = None
    initial: Sequence[str] = ()


@dataclass
class LeagueResult:
    store: PopulationStore
    payoff: PayoffMatrix
    main_ids: List[str] = field(default_factory=list)
    exploiter_ids: List[str] = field(default_factory=list)
    records: List[dict] = field(default_factory=list)
    aborted: Optional[str] = None


def pfsp_opponents(payoff: PayoffMatrix, learner: str, candidates: Sequence[str], p: float) -> List[Tuple[str, float]]:
    """Opponent distribution for ``learner`` weighted toward candidates it does not beat."""
    if not candidates:
        raise ContractError("no PFSP candidates")
    rates = []
    for c in candidates:
        if learner in payoff and c in payoff and payoff.counts[payoff.index(learner), payoff.index(c)] > 0:
            rates.append(payoff.win_rate(learner, c))
        else:
            rates.append(UNPLAYED_WIN_RATE)
    w = pfsp_weights(rates, p)
    return [(c, float(x)) for c, x in zip(candidates, w) if x > 0]


def league_run(config: LeagueConfig, train_config, store: PopulationStore, payoff: Optional[PayoffMatrix] = None,
               checkpoint_dir: Optional[str] = None, on_generation: Optional[Callable] = None,
               stop_event=None) -> LeagueResult:
    """Run ``config.generations`` main/exploiter generations.

    ``store`` must already hold ``config.main_init`` (with parameters) and
    every id in ``config.exploiter_pool``. Each generation the main agent
    continues from its latest snapshot against PFSP-sampled opponents drawn
    from the whole store, then an exploiter (fresh or from the pool) trains
    against the newest main snapshot only. Phases run one after the other so
    runs are reproducible.
    """
    from ..runtime.evaluation import evaluation_manager

    if config.main_init is None or config.main_init not in store:
        raise ContractError("league needs a main-agent init present in the store")
    for pid in config.exploiter_pool:
        if pid not in store:
            raise ContractError(f"exploiter init {pid!r} not in store")
    payoff = payoff if payoff is not None else PayoffMatrix()
    reward = config.reward if config.reward is not None else train_config.reward
    members = list(store.ids)
    for pid in config.initial:
        if pid not in store:
            store.add(pid, tags=["init"])
            members.append(pid)
    for pid in members:
        if pid not in payoff:
            payoff.add(pid)

    def evaluate(new_id):
        others = [p for p in store.ids if p != new_id]
        rep = evaluation_manager(store.ids, config.eval_episodes, train_config.sim, payoff,
                                 resolve_policy=store.resolve, seed=config.seed, encoder=train_config.encoder,
                                 pairs=[(new_id, o) for o in others])
        store.update_elo(elo_results(rep.results))
        return rep

    result = LeagueResult(store, payoff)
    main_prev = config.main_init
    main_params = store.resolve(main_prev)

    def _train(pid, opponents, init, seed, iterations, target):
        base = replace(train_config, iterations=iterations)
        for attempt in range(2):
            try:
                return train_response(base, pid, opponents, init_params=init, seed=seed + attempt, reward=reward,
                                      resolve_policy=store.resolve, target_win_rate=target, stop_event=stop_event)
            except TrainingError as exc:
                if attempt == 1:
                    result.aborted = f"{pid}: {exc}"
        return None

    for g in range(1, config.generations + 1):
        if stop_event is not None and stop_event.is_set():
            break
        candidates = [p for p in store.ids if p != main_prev] or [main_prev]
        opponents = pfsp_opponents(payoff, main_prev, candidates, config.pfsp_exponent)
        main_id = f"main_{g}"
        out = _train(main_id, opponents, main_params, config.seed + 104_729 * g, config.main_iterations, None)
        if out is None:
            break
        main_params = out.params
        store.add(main_id, main_params, generation=g, parent=main_prev, reward=reward.to_dict(), tags=["main"])
        _checkpoint(store, main_id, main_params, checkpoint_dir)
        evaluate(main_id)
        result.main_ids.append(main_id)

        pool = list(config.exploiter_pool)
        if pool:
            parent = pool[(g - 1) % len(pool)]
            init = store.resolve(parent)
        else:
            parent, init = None, None
        exp_id = f"exploiter_{g}"
        exp_opponents = [(main_id, 1.0)]
        out_e = _train(exp_id, exp_opponents, init, config.seed + 130_363 * g, config.exploiter_iterations,
                       config.exploiter_target)
        if out_e is None:
            break
        evicted = store.add(exp_id, out_e.params, generation=g, parent=parent, reward=reward.to_dict(),
                            tags=["exploiter"])
        if exp_id in store:
            _checkpoint(store, exp_id, out_e.params, checkpoint_dir)
            evaluate(exp_id)
            result.exploiter_ids.append(exp_id)
        record = {
            "generation": g,
            "main_id": main_id,
            "main_opponents": opponents,
            "exploiter_id": exp_id,
            "exploiter_opponents": exp_opponents,
            "exploiter_parent": parent,
            "exploiter_vs_main": float(payoff.score[payoff.index(exp_id), payoff.index(main_id)]),
            "evicted": evicted,
            "elo": store.ratings(),
        }
        result.records.append(record)
        if on_generation is not None:
            on_generation(record, result)
        main_prev = main_id
    return result
