"""Critic traces over recorded trajectories."""
from __future__ import annotations

import glob
import os
from typing import Dict, List, Optional, Union

import numpy as np

from .. import nn
from ..env import encoder_dim
from ..env.replay import Replay
from ..env.state import EventKind
from ..ippo import compute_gae
from ..reward import RewardSpec, compute_rewards


def _params(source, replay: Replay, encoder: str) -> nn.PolicyParams:
    if isinstance(source, nn.PolicyParams):
        return source
    dim = encoder_dim(encoder, replay.config.players_per_team)
    return nn.load_checkpoint(source, expect_input_dim=dim)


def value_td_diagnostics(checkpoint: Union[str, nn.PolicyParams], replay: Replay, gamma: float = 1.0,
                         lam: float = 0.95, side: int = 0, reward_spec: Optional[RewardSpec] = None,
                         encoder: str = "basic", done_at_goals: bool = True) -> Dict[str, object]:
    """Per-step critic values, GAE returns and TD errors for one team.

    Arrays have shape (T, F): one column per field player of ``side``. The
    final state is terminal, so the last TD error uses a zero successor.
    Goals also end a chain when ``done_at_goals`` is set, matching training.
    """
    from ..env import encode_team

    spec = reward_spec if reward_spec is not None else RewardSpec([("team_goal", 1.0)])
    params = _params(checkpoint, replay, encoder)
    F = replay.config.field_players
    T = replay.num_transitions
    feats = np.stack([encode_team(replay.state_at(t), side, encoder) for t in range(T)]) if T else np.zeros((0, F, params.input_dim))
    rewards = compute_rewards(replay, spec)[:, side * F:(side + 1) * F]
    goals_for, goals_against = [], []
    dones = np.zeros(T, dtype=bool)
    if T:
        dones[-1] = True
    for ev in replay.events:
        if ev.kind != EventKind.GOAL:
            continue
        t = ev.step - replay.start_step
        (goals_for if ev.actor[0] == side else goals_against).append(t)
        if done_at_goals:
            dones[t] = True
    values = np.zeros((T, F))
    returns = np.zeros((T, F))
    deltas = np.zeros((T, F))
    for i in range(F):
        v = nn.critic_forward(params, feats[:, i]) if T else np.zeros(0)
        adv, ret = compute_gae(rewards[:, i], v, dones, gamma, lam)
        succ = np.append(v[1:], 0.0)
        deltas[:, i] = rewards[:, i] + gamma * succ * ~dones - v
        values[:, i] = v
        returns[:, i] = ret
    return {
        "values": values,
        "returns": returns,
        "td": deltas,
        "rewards": rewards,
        "dones": dones,
        "goals_for": sorted(goals_for),
        "goals_against": sorted(goals_against),
    }


def checkpoint_sweep(directory: str, replay: Replay, gamma: float = 1.0, lam: float = 0.95, side: int = 0,
                     reward_spec: Optional[RewardSpec] = None, encoder: str = "basic") -> List[dict]:
    """Scale summary (mean |V|, max |delta|) for every checkpoint under ``directory``."""
    paths = sorted(glob.glob(os.path.join(directory, "**", "*.ckpt"), recursive=True))
    out = []
    for path in paths:
        tr = value_td_diagnostics(path, replay, gamma, lam, side, reward_spec, encoder)
        v, d = tr["values"], tr["td"]
        out.append({
            "checkpoint": os.path.relpath(path, directory),
            "mean_abs_value": float(np.mean(np.abs(v))) if v.size else 0.0,
            "max_abs_td": float(np.max(np.abs(d))) if d.size else 0.0,
        })
    return out


def trace_records(traces: Dict[str, object]):
    """Line-delimited records, one per (step, player)."""
    values, returns, td, rewards = traces["values"], traces["returns"], traces["td"], traces["rewards"]
    gf, ga = set(traces["goals_for"]), set(traces["goals_against"])
    for t in range(values.shape[0]):
        for i in range(values.shape[1]):
            yield {
                "t": t, "player": i, "value": float(values[t, i]), "return": float(returns[t, i]),
                "td": float(td[t, i]), "reward": float(rewards[t, i]),
                "goal_for": t in gf, "goal_against": t in ga,
            }
