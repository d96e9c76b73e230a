"""Episode generation: play, shape rewards, cut into training segments."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import nn
from ..env import SimConfig, encode_team, is_terminal, reset, step, team_masks
from ..env.replay import Replay
from ..env.state import EventKind
from ..errors import ConfigError, ContractError
from ..ippo import SampleBatch
from ..reward import RewardSpec, compute_reward_components
from .controllers import PolicyController, is_scripted_spec, parse_opponent
from .timing import PhaseTimer

DEFAULT_SAMPLE_LENGTH = 1000


@dataclass
class Segment:
    batch: SampleBatch
    policy_id: str
    version: int
    worker: int
    episode: int
    index: int
    start: int
    length: int


@dataclass
class RolloutTask:
    policy_id: str
    opponents: List[Tuple[str, float]]
    sim_config: SimConfig
    reward_spec: RewardSpec
    encoder: str = "basic"
    episodes: Optional[int] = None
    sample_length: int = DEFAULT_SAMPLE_LENGTH

    def __post_init__(self):
        if not self.opponents:
            raise ConfigError("rollout task needs at least one opponent")
        probs = np.array([p for _, p in self.opponents], dtype=np.float64)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(f"opponent probabilities must be non-negative and sum to 1, got {probs.tolist()}")
        if self.sample_length < 1:
            raise ConfigError("sample_length must be positive")

    def sample_opponent(self, rng: np.random.Generator) -> str:
        probs = np.array([p for _, p in self.opponents], dtype=np.float64)
        k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        return self.opponents[min(k, len(self.opponents) - 1)][0]


def cut_points(T: int, done_steps: Sequence[int], sample_length: int) -> List[Tuple[int, int]]:
    """Half-open step ranges: a new segment starts after every done step and every ``sample_length`` steps."""
    out = []
    dones = set(done_steps)
    start = 0
    for t in range(T):
        if t + 1 - start >= sample_length or t in dones or t == T - 1:
            out.append((start, t + 1))
            start = t + 1
    return out


def outcome(goals_for: int, goals_against: int) -> int:
    return (goals_for > goals_against) - (goals_for < goals_against)


def play_episode(
    config: SimConfig,
    params: nn.PolicyParams,
    opponent,
    side: int,
    rng: np.random.Generator,
    reward_spec: RewardSpec,
    encoder: str = "basic",
    sample_length: int = DEFAULT_SAMPLE_LENGTH,
    timer: Optional[PhaseTimer] = None,
    keep_replay: bool = False,
    greedy: bool = False,
):
    """One episode of ``params`` (on ``side``) against ``opponent``.

    Returns ``(batches, stats, replay)`` where ``batches`` is a list of
    ``(start, length, SampleBatch)`` and ``replay`` is None unless requested.
    """
    timer = timer or PhaseTimer()
    F = config.field_players
    state = reset(config, int(rng.integers(2**31)))
    states = [state]
    joint = []
    events = []
    feats, masks, acts, logps = [], [], [], []
    while not is_terminal(state):
        with timer.phase("encoding"):
            x = encode_team(state, side, encoder)
            m = team_masks(state, side)
        with timer.phase("inference"):
            if greedy:
                probs, logp_all = nn.actor_forward(params, x, m)
                a = probs.argmax(axis=1)
                lp = logp_all[np.arange(F), a]
            else:
                a, lp, _ = nn.policy_step(params, x, m, rng, with_value=False)
            other = opponent.act(state, 1 - side, rng)
        mine = [int(v) for v in a]
        pair = (mine, other) if side == 0 else (other, mine)
        with timer.phase("env_step"):
            state, ev = step(state, pair[0], pair[1], rng)
        feats.append(x)
        masks.append(m)
        acts.append(a)
        logps.append(lp)
        joint.append(pair)
        events.extend(ev)
        states.append(state)
    with timer.phase("encoding"):
        final_x = encode_team(state, side, encoder)

    with timer.phase("reward"):
        replay = Replay.from_states(states, joint, events)
        comps = compute_reward_components(replay, reward_spec)
        cols = slice(side * F, (side + 1) * F)
        T = replay.num_transitions
        rewards = np.zeros((T, F))
        totals = {}
        for name, mat in comps.items():
            part = mat[:, cols]
            rewards += part
            totals[name] = float(part.sum())
        goal_steps = sorted({e.step - replay.start_step for e in events if e.kind == EventKind.GOAL})

    X = np.stack(feats + [final_x])  # (T+1, F, D)
    M = np.stack(masks)
    A = np.stack(acts)
    LP = np.stack(logps)
    batches = []
    for start, stop in cut_points(T, goal_steps, sample_length):
        n = stop - start
        done = np.zeros(n, dtype=bool)
        if (stop - 1) in goal_steps or stop == T:
            done[-1] = True
        ends = np.zeros(n, dtype=bool)
        ends[-1] = True
        parts = []
        for i in range(F):
            parts.append(SampleBatch(
                features=X[start:stop, i],
                masks=M[start:stop, i],
                actions=A[start:stop, i].astype(np.int64),
                old_logp=LP[start:stop, i],
                rewards=rewards[start:stop, i],
                values=np.zeros(n),
                dones=done.copy(),
                ends=ends.copy(),
                bootstrap_features=np.repeat(X[stop, i][None], n, axis=0),
            ))
        batches.append((start, n, SampleBatch.concat(parts)))

    gf, ga = state.score[side], state.score[1 - side]
    stats = {
        "side": side,
        "opponent": getattr(opponent, "name", "?"),
        "goals_for": int(gf),
        "goals_against": int(ga),
        "outcome": outcome(gf, ga),
        "steps": T,
        "reward_totals": totals,
        "illegal_actions": sum(1 for e in events if e.kind == EventKind.ILLEGAL_ACTION and e.actor[0] == side),
    }
    return batches, stats, (replay if keep_replay else None)


def play_match(config: SimConfig, left, right, rng: np.random.Generator, keep_replay: bool = False):
    """Controller vs controller. Returns (final state, replay or None)."""
    state = reset(config, int(rng.integers(2**31)))
    states, joint, events = [state], [], []
    while not is_terminal(state):
        al = left.act(state, 0, rng)
        ar = right.act(state, 1, rng)
        state, ev = step(state, al, ar, rng)
        if keep_replay:
            states.append(state)
            joint.append((al, ar))
            events.extend(ev)
    replay = Replay.from_states(states, joint, events) if keep_replay else None
    return state, replay


def episode_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(k) for k in keys]]))


class RolloutWorker:
    """Plays episodes for a task and pushes segments into a data server.

    The trainee snapshot is refreshed from the policy server at every
    episode boundary; opponents that are policy ids are resolved through
    ``resolve_policy`` (falling back to the policy server).
    """

    def __init__(self, task: RolloutTask, data_server, policy_server, worker_id: int = 0, seed: int = 0,
                 resolve_policy: Optional[Callable] = None, stats_sink: Optional[Callable] = None,
                 timer: Optional[PhaseTimer] = None):
        self.task = task
        self.data_server = data_server
        self.policy_server = policy_server
        self.worker_id = worker_id
        self.seed = seed
        self.resolve_policy = resolve_policy or policy_server.get
        self.stats_sink = stats_sink
        self.timer = timer or PhaseTimer()
        self.episodes_done = 0
        self.discarded = 0
        self.env_steps = 0
        self.stop_event = threading.Event()

    def run_episode(self, episode: int, params=None, rng=None):
        task = self.task
        rng = rng or episode_rng(self.seed, self.worker_id, episode)
        if params is None:
            params = self.policy_server.get(task.policy_id)
        opp_spec = task.sample_opponent(rng)
        opponent = _resolve(opp_spec, self.resolve_policy, task.encoder)
        side = int(rng.integers(2))
        try:
            batches, stats, _ = play_episode(
                task.sim_config, params, opponent, side, rng, task.reward_spec,
                task.encoder, task.sample_length, self.timer,
            )
        except ContractError:
            self.discarded += 1
            return None, None
        stats.update(worker=self.worker_id, episode=episode, version=params.version, opponent=opp_spec)
        segments = [
            Segment(b, task.policy_id, params.version, self.worker_id, episode, k, start, n)
            for k, (start, n, b) in enumerate(batches)
        ]
        self.env_steps += stats["steps"]
        self.episodes_done += 1
        return segments, stats

    def loop(self) -> None:
        episode = 0
        while not self.stop_event.is_set() and not self.data_server.closed:
            if self.task.episodes is not None and episode >= self.task.episodes:
                break
            segments, stats = self.run_episode(episode)
            episode += 1
            if segments is None:
                continue
            with self.timer.phase("push"):
                for seg in segments:
                    if not self.data_server.push(seg):
                        return
            if self.stats_sink is not None:
                self.stats_sink(stats)

    def stop(self) -> None:
        self.stop_event.set()


def _resolve(spec: str, resolve_policy, encoder: str):
    if is_scripted_spec(spec):
        return parse_opponent(spec, None, encoder)
    resolved = resolve_policy(spec)
    if hasattr(resolved, "act"):
        return resolved
    return PolicyController(resolved, encoder=encoder, name=spec)
