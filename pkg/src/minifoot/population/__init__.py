"""Meta-game layer: payoffs, Nash mixtures, ratings, PSRO and league training."""
from .league import LeagueConfig, LeagueResult, league_run, pfsp_opponents
from .meta import (ELO_INIT, ELO_K, NashResult, check_antisymmetric, elo_expected, elo_update, exploitability,
                   nash_solve, pfsp_weights)
from .payoff import PayoffMatrix
from .pipeline import PipelineBudgets, PipelineResult, three_stage_pipeline
from .psro import PsroConfig, PsroResult, meta_distribution, psro_run, psro_synthetic, train_response
from .store import PopulationEntry, PopulationStore

__all__ = [
    "ELO_INIT", "ELO_K", "LeagueConfig", "LeagueResult", "NashResult", "PayoffMatrix", "PipelineBudgets",
    "PipelineResult", "PopulationEntry", "PopulationStore", "PsroConfig", "PsroResult", "check_antisymmetric",
    "elo_expected", "elo_update", "exploitability", "league_run", "meta_distribution", "nash_solve",
    "pfsp_opponents", "pfsp_weights", "psro_run", "psro_synthetic", "three_stage_pipeline", "train_response",
]
