"""Per-match statistics computed from the event graph."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..env.replay import Replay
from ..env.state import EventKind
from .graph import GameGraph, build_game_graph

TEAM_METRICS = ("goals", "shots", "shot_accuracy", "possession", "passes", "pass_accuracy", "tackles",
                "interceptions", "assists")


@dataclass
class TeamStats:
    goals: int = 0
    shots: int = 0
    shot_accuracy: float = 0.0
    possession: float = 0.0
    passes: int = 0
    pass_accuracy: float = 0.0
    tackles: int = 0
    interceptions: int = 0
    assists: int = 0
    movement: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in TEAM_METRICS + ("movement",)}


@dataclass
class MatchStats:
    teams: List[TeamStats]
    movement: np.ndarray  # (2, P) distance covered by each player
    steps: int
    final_score: tuple = (0, 0)
    completed_passes: List[int] = field(default_factory=lambda: [0, 0])
    intercepted_passes: List[int] = field(default_factory=lambda: [0, 0])

    def table(self) -> List[Dict[str, float]]:
        return [t.as_dict() for t in self.teams]


def _ratio(num: int, den: int) -> float:
    return float(num) / den if den > 0 else 0.0


def match_stats(graph: Optional[GameGraph], replay: Replay) -> MatchStats:
    """Goals, shots, possession, passing and defensive counts per team.

    Passes count attempts; pass accuracy is completed / (completed +
    intercepted). Tackles are won tackles; interceptions are credited to the
    intercepting team. Possession is the fraction of transitions that start
    with the team owning the ball, so the two fractions sum to at most 1.
    """
    if graph is None:
        graph = build_game_graph(replay)
    counts = {0: {}, 1: {}}

    def bump(team, key):
        counts[team][key] = counts[team].get(key, 0) + 1

    for ev in graph.events:
        team = ev.actor[0]
        k = ev.kind
        if k == EventKind.GOAL:
            bump(team, "goals")
            if ev.co_actor is not None:
                bump(ev.co_actor[0], "assists")
        elif k == EventKind.SHOT_ATTEMPT:
            bump(team, "shots")
        elif k == EventKind.PASS_ATTEMPT:
            bump(team, "passes")
        elif k == EventKind.PASS_COMPLETE:
            bump(team, "completed")
        elif k == EventKind.PASS_INTERCEPTED:
            bump(team, "intercepted")
            bump(ev.co_actor[0] if ev.co_actor is not None else 1 - team, "interceptions")
        elif k == EventKind.TACKLE_WON:
            bump(team, "tackles")

    T = replay.num_transitions
    owned = [0, 0]
    for o in replay.owner[:T]:
        if o is not None:
            owned[o[0]] += 1
    steps = np.linalg.norm(np.diff(replay.pos, axis=0), axis=-1)  # (T, 2, P)
    # a goal resets everyone to the kickoff lineup; that jump is not running
    for ev in graph.events:
        if ev.kind == EventKind.GOAL and 0 <= ev.step - replay.start_step < T:
            steps[ev.step - replay.start_step] = 0.0
    movement = steps.sum(axis=0) if T else np.zeros(replay.pos.shape[1:3])

    teams = []
    for team in (0, 1):
        c = counts[team]
        done, lost = c.get("completed", 0), c.get("intercepted", 0)
        teams.append(TeamStats(
            goals=c.get("goals", 0),
            shots=c.get("shots", 0),
            shot_accuracy=_ratio(c.get("goals", 0), c.get("shots", 0)),
            possession=_ratio(owned[team], T),
            passes=c.get("passes", 0),
            pass_accuracy=_ratio(done, done + lost),
            tackles=c.get("tackles", 0),
            interceptions=c.get("interceptions", 0),
            assists=c.get("assists", 0),
            movement=float(movement[team].sum()),
        ))
    final = tuple(int(x) for x in replay.score[-1])
    return MatchStats(teams, movement, T, final,
                      [counts[0].get("completed", 0), counts[1].get("completed", 0)],
                      [counts[0].get("intercepted", 0), counts[1].get("intercepted", 0)])
