"""Round-robin evaluation feeding a payoff matrix."""
from __future__ import annotations

import concurrent.futures
import zlib
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..env import SimConfig
from ..errors import CheckpointError
from .controllers import PolicyController, is_scripted_spec, parse_opponent
from .rollout import episode_rng, play_match


@dataclass
class EvalReport:
    played: List[Tuple[str, str, int]] = field(default_factory=list)
    skipped: List[Tuple[str, str, str]] = field(default_factory=list)
    results: List[dict] = field(default_factory=list)


def make_controller(spec: str, resolve_policy: Optional[Callable], encoder: str = "basic", greedy: bool = False):
    """Controller for a bot spec, ``random`` or a policy id resolved to params."""
    if is_scripted_spec(spec):
        return parse_opponent(spec, None, encoder)
    if resolve_policy is None:
        raise CheckpointError(f"no resolver for policy {spec!r}")
    resolved = resolve_policy(spec)
    if resolved is None:
        raise CheckpointError(f"policy {spec!r} not found")
    if hasattr(resolved, "act"):
        return resolved
    return PolicyController(resolved, encoder=encoder, greedy=greedy, name=spec)


def _pair_key(a: str, b: str) -> int:
    return zlib.crc32(f"{a}\x00{b}".encode())


def play_pair(config: SimConfig, ctrl_a, ctrl_b, episodes: int, seed: int, key: int = 0,
              keep_replays: bool = False) -> List[dict]:
    """``episodes`` games between a and b with sides alternating.

    Games 2k and 2k+1 share one random stream so the two sides see the
    same kickoff and the same draws with roles swapped.
    """
    out = []
    for e in range(episodes):
        rng = episode_rng(seed, key, e // 2)
        a_left = e % 2 == 0
        left, right = (ctrl_a, ctrl_b) if a_left else (ctrl_b, ctrl_a)
        final, replay = play_match(config, left, right, rng, keep_replay=keep_replays)
        ga, gb = (final.score[0], final.score[1]) if a_left else (final.score[1], final.score[0])
        out.append({"episode": e, "a_left": a_left, "goals_a": int(ga), "goals_b": int(gb), "replay": replay})
    return out


def evaluation_manager(
    ids: Sequence[str],
    episodes_per_pair: int,
    config: SimConfig,
    payoff,
    resolve_policy: Optional[Callable] = None,
    seed: int = 0,
    encoder: str = "basic",
    pairs: Optional[Sequence[Tuple[str, str]]] = None,
    workers: int = 1,
    greedy: bool = False,
) -> EvalReport:
    """Play every unordered pair (or just ``pairs``) and record results into ``payoff``.

    Ids missing from ``payoff`` are added. Pairs whose policies cannot be
    loaded are reported in ``skipped`` and leave the matrix untouched.
    """
    for pid in ids:
        if pid not in payoff:
            payoff.add(pid)
    if pairs is None:
        pairs = [(ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids))]
    report = EvalReport()
    cache: Dict[str, object] = {}
    errors: Dict[str, str] = {}
    for pid in sorted({p for pair in pairs for p in pair}):
        try:
            cache[pid] = make_controller(pid, resolve_policy, encoder, greedy)
        except (CheckpointError, FileNotFoundError) as exc:
            errors[pid] = str(exc)

    jobs = []
    for a, b in pairs:
        if a == b:
            continue
        bad = errors.get(a) or errors.get(b)
        if bad:
            report.skipped.append((a, b, bad))
            continue
        jobs.append((a, b))

    def run(job):
        a, b = job
        return play_pair(config, cache[a], cache[b], episodes_per_pair, seed, _pair_key(a, b))

    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    # matrix updates are serialised in job order
    for (a, b), games in zip(jobs, results):
        for g in games:
            payoff.record(a, b, g["goals_a"], g["goals_b"])
            report.results.append({"a": a, "b": b, **{k: v for k, v in g.items() if k != "replay"}})
        report.played.append((a, b, len(games)))
    return report
