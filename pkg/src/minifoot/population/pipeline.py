"""Three-stage population training: diverse rewards, targeted matchups, league."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

from ..errors import ContractError
from ..reward import RewardSpec
from .league import LeagueConfig, LeagueResult, league_run
from .payoff import PayoffMatrix
from ..runtime.evaluation import evaluation_manager
from .psro import PsroConfig, PsroResult, _checkpoint, elo_results, psro_run, train_response
from .store import PopulationStore


@dataclass
class PipelineBudgets:
    stage1_generations: int = 2
    stage1_iterations: int = 20
    stage2_iterations: int = 20
    stage3_generations: int = 2
    main_iterations: int = 20
    exploiter_iterations: int = 20
    eval_episodes: int = 10


@dataclass
class PipelineResult:
    store: PopulationStore
    stage1: List[PsroResult] = field(default_factory=list)
    winners: List[str] = field(default_factory=list)
    representatives: List[str] = field(default_factory=list)
    stage2_records: List[dict] = field(default_factory=list)
    league: Optional[LeagueResult] = None


def _highest_elo(store: PopulationStore, ids: Sequence[str]) -> str:
    # first id wins ties so the choice is deterministic
    return max(ids, key=lambda p: (store.get(p).elo, -ids.index(p)))


def three_stage_pipeline(specs: Sequence[Tuple[str, RewardSpec]], train_config, budgets: PipelineBudgets,
                         seed: int = 0, checkpoint_dir: Optional[str] = None,
                         on_stage: Optional[Callable] = None, population_size: Optional[int] = None) -> PipelineResult:
    """Orchestrate the three stages on one shared store.

    Stage 1 runs one PSRO trial per reward spec (no benchmark bot) and keeps
    each trial's highest-Elo best response. Stage 2 trains every winner
    against the next winner (cyclically) as a fixed opponent. Stage 3 runs a
    league whose main agent starts from the highest-rated representative and
    whose exploiters start from the representatives.
    """
    names = [n for n, _ in specs]
    if len(specs) < 2:
        raise ContractError("the pipeline needs at least two reward specs")
    if len(set(names)) != len(names):
        raise ContractError("reward spec names must be unique")
    store = PopulationStore(population_size)
    out = PipelineResult(store)

    def ckpt(sub):
        return None if checkpoint_dir is None else os.path.join(checkpoint_dir, sub)

    # stage 1: one PSRO trial per reward spec
    stage1_train = replace(train_config, iterations=budgets.stage1_iterations)
    for k, (name, spec) in enumerate(specs):
        cfg = PsroConfig(generations=budgets.stage1_generations, include_bot=False, inherit=True, reward=spec,
                         eval_episodes=budgets.eval_episodes, prefix=f"s1_{name}", seed=seed + 1000 * k,
                         initial=("random",))
        res = psro_run(cfg, stage1_train, store=store, payoff=PayoffMatrix(), checkpoint_dir=ckpt("stage1"))
        out.stage1.append(res)
        brs = [p for p in res.population if "br" in store.get(p).tags]
        if not brs:
            raise ContractError(f"stage 1 trial {name!r} produced no policies")
        winner = _highest_elo(store, brs)
        store.get(winner).tags = sorted(set(store.get(winner).tags) | {"init", f"stage1:{name}"})
        out.winners.append(winner)
    if on_stage is not None:
        on_stage(1, out)

    # stage 2: targeted matchups between winners
    for k, a in enumerate(out.winners):
        b = out.winners[(k + 1) % len(out.winners)]
        pid = f"s2_{a}_vs_{b}"
        spec = specs[k][1]
        res = train_response(replace(train_config, iterations=budgets.stage2_iterations), pid, [(b, 1.0)],
                             init_params=store.resolve(a), seed=seed + 50_000 + k, reward=spec,
                             resolve_policy=store.resolve)
        store.add(pid, res.params, generation=0, parent=a, reward=spec.to_dict(), tags=["init", "stage2"])
        _checkpoint(store, pid, res.params, ckpt("stage2"))
        out.representatives.append(pid)
        out.stage2_records.append({"policy_id": pid, "init": a, "opponent": b,
                                   "train_win_rate": res.win_rate(train_config.win_window),
                                   "iterations": len(res.history)})
    if on_stage is not None:
        on_stage(2, out)

    # stage 3: league seeded by the representatives
    payoff = PayoffMatrix()
    reps = list(out.representatives)
    rep = evaluation_manager(reps, budgets.eval_episodes, train_config.sim, payoff, resolve_policy=store.resolve,
                             seed=seed, encoder=train_config.encoder)
    store.update_elo(elo_results(rep.results))
    main_init = _highest_elo(store, reps)
    league_cfg = LeagueConfig(
        generations=budgets.stage3_generations, main_init=main_init, exploiter_pool=reps,
        main_iterations=budgets.main_iterations, exploiter_iterations=budgets.exploiter_iterations,
        eval_episodes=budgets.eval_episodes, reward=RewardSpec.from_dict(store.get(main_init).reward),
        seed=seed + 90_000,
    )
    out.league = league_run(league_cfg, train_config, store, payoff=payoff, checkpoint_dir=ckpt("stage3"))
    if on_stage is not None:
        on_stage(3, out)
    return out
