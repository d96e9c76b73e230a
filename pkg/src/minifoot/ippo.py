"""Parameter-shared independent PPO."""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import nn
from .errors import ConfigError, ContractError, TrainingError


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    gamma: float = 1.0
    lam: float = 0.95
    entropy_coef: float = 1e-4
    lr: float = 5e-4
    epochs: int = 5
    minibatches: int = 1
    kl_stop: float = 0.01
    value_clip: bool = True
    value_clip_eps: float = 0.2
    value_coef: float = 1.0
    adam_eps: float = 1e-5
    standardize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if self.epochs < 1 or self.minibatches < 1:
            raise ConfigError("epochs and minibatches must be positive")
        if self.lr < 0 or self.entropy_coef < 0 or self.kl_stop < 0 or self.value_clip_eps <= 0:
            raise ConfigError("lr, entropy_coef, kl_stop must be >= 0 and value_clip_eps > 0")

    def loss_spec(self) -> nn.LossSpec:
        return nn.LossSpec(self.clip_eps, self.value_clip, self.value_clip_eps, self.entropy_coef, self.value_coef)


# ---------------------------------------------------------------------------
# advantage estimation


def compute_gae(rewards, values, dones, gamma: float, lam: float, next_values=None, ends=None):
    """Generalised advantage estimates and returns for a flat sequence.

    ``values[t]`` estimates s_t. The successor value is ``values[t + 1]``
    unless ``ends[t]`` marks the last step of a chain, in which case it is
    ``next_values[t]`` (the bootstrap; 0 when omitted). ``dones[t]`` zeroes
    the successor value and stops the recursion.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=bool)
    T = len(r)
    if v.shape != (T,) or d.shape != (T,):
        raise ContractError(f"misaligned lengths: rewards {T}, values {v.shape}, dones {d.shape}")
    if ends is None:
        e = np.zeros(T, dtype=bool)
        if T:
            e[-1] = True
    else:
        e = np.asarray(ends, dtype=bool)
        if e.shape != (T,):
            raise ContractError("ends misaligned")
    nv = np.zeros(T) if next_values is None else np.asarray(next_values, dtype=np.float64)
    if nv.shape != (T,):
        raise ContractError("next_values misaligned")
    succ = np.empty(T)
    if T:
        succ[:-1] = v[1:]
        succ[-1] = 0.0
    succ = np.where(e, nv, succ)
    cont = ~d
    delta = r + gamma * succ * cont - v
    adv = np.zeros(T)
    acc = 0.0
    link = gamma * lam
    for t in range(T - 1, -1, -1):
        if e[t] or d[t]:
            acc = 0.0
        acc = delta[t] + link * acc
        adv[t] = acc
    return adv, adv + v


# ---------------------------------------------------------------------------
# scalar losses (the quantities whose gradients nn.backward implements)


def policy_loss(advantages, new_logp, old_logp, clip_eps: float) -> float:
    with np.errstate(over="ignore"):
        ratio = np.exp(np.asarray(new_logp) - np.asarray(old_logp))
    if not np.all(np.isfinite(ratio)):
        raise TrainingError("non-finite probability ratio")
    adv = np.asarray(advantages, dtype=np.float64)
    return -float(np.mean(np.minimum(ratio * adv, np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * adv)))


def value_loss(values, targets, old_values, clip_eps: float, clip_enabled: bool = True) -> float:
    v = np.asarray(values, dtype=np.float64)
    tgt = np.asarray(targets, dtype=np.float64)
    sq1 = (v - tgt) ** 2
    if not clip_enabled:
        return float(np.mean(sq1))
    old = np.asarray(old_values, dtype=np.float64)
    sq2 = (old + np.clip(v - old, -clip_eps, clip_eps) - tgt) ** 2
    return float(np.mean(np.minimum(sq1, sq2)))


def entropy(probs, mask) -> float:
    p = np.atleast_2d(probs)
    m = np.atleast_2d(mask)
    logp = np.log(np.where(m & (p > 0), p, 1.0))
    return float(np.mean(-(p * logp).sum(axis=1)))


def total_loss(p_loss: float, v_loss: float, ent: float, entropy_coef: float, value_coef: float = 1.0) -> float:
    return p_loss + value_coef * v_loss - entropy_coef * ent


def evaluate_loss(params: nn.PolicyParams, batch: nn.LossBatch, spec: nn.LossSpec) -> float:
    """Total loss through the forward passes only (reference for gradient checks)."""
    _, logp = nn.actor_forward(params, batch.features, batch.masks)
    new_logp = logp[np.arange(len(batch.actions)), batch.actions]
    probs, _ = nn.actor_forward(params, batch.features, batch.masks)
    v, _ = nn.critic_raw(params, batch.features)
    p = policy_loss(batch.advantages, new_logp, batch.old_logp, spec.clip_eps)
    vl = value_loss(v, batch.targets, batch.old_values, spec.value_clip_eps, spec.value_clip)
    return total_loss(p, vl, entropy(probs, batch.masks), spec.entropy_coef, spec.value_coef)


# ---------------------------------------------------------------------------
# batches


@dataclass
class SampleBatch:
    """Flat agent-steps. Consecutive rows of one agent form a chain; ``ends``
    marks the last row of each chain and ``bootstrap_features`` /
    ``bootstrap_masks`` hold the observation after it (used unless done).
    """

    features: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    ends: np.ndarray
    bootstrap_features: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.actions)
        for name in ("features", "masks", "old_logp", "rewards", "values", "dones", "ends", "bootstrap_features"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"SampleBatch field {name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self):
        return len(self.actions)

    @classmethod
    def concat(cls, parts: Sequence["SampleBatch"]) -> "SampleBatch":
        if not parts:
            raise ContractError("no batches to concatenate")
        names = ("features", "masks", "actions", "old_logp", "rewards", "values", "dones", "ends", "bootstrap_features")
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in names})


def attach_gae(batch: SampleBatch, params: nn.PolicyParams, config: PpoConfig) -> SampleBatch:
    """Recompute values with the current critic and fill in advantages and returns."""
    values = nn.critic_forward(params, batch.features)
    boot = np.zeros(len(batch))
    idx = np.flatnonzero(batch.ends & ~batch.dones)
    if len(idx):
        boot[idx] = nn.critic_forward(params, batch.bootstrap_features[idx])
    adv, ret = compute_gae(batch.rewards, values, batch.dones, config.gamma, config.lam, boot, batch.ends)
    return replace(batch, values=values, advantages=adv, returns=ret)


def _phase(timer, name):
    return timer.phase(name) if timer is not None else contextlib.nullcontext()


def explained_variance(pred, target) -> float:
    var = float(np.var(target))
    if var == 0.0:
        return 0.0
    return 1.0 - float(np.var(np.asarray(target) - np.asarray(pred))) / var


def ppo_update(
    batch: SampleBatch,
    params: nn.PolicyParams,
    adam: nn.AdamState,
    config: PpoConfig,
    rng: np.random.Generator,
    timer=None,
):
    """Run up to ``config.epochs`` passes. Returns (params', adam', stats).

    On non-finite losses or gradients the old parameters and optimiser
    state are returned unchanged and ``stats["aborted"]`` is set.
    """
    if batch.advantages is None or batch.returns is None:
        raise ContractError("call attach_gae before ppo_update")
    n = len(batch)
    if n == 0:
        raise ContractError("empty batch")
    start_params, start_adam = params, adam
    try:
        params = nn.popart_update(params, batch.returns)
        targets = nn.normalize_values(params, batch.returns)
        old_values = nn.normalize_values(params, batch.values)
        adv = batch.advantages
        if config.standardize_advantages and n > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        spec = config.loss_spec()
        adam = replace(adam, lr=config.lr, eps=config.adam_eps)
        epochs_run = 0
        kl = 0.0
        last = {}
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            sums: Dict[str, float] = {}
            for chunk in np.array_split(order, config.minibatches):
                if len(chunk) == 0:
                    continue
                mb = nn.LossBatch(
                    batch.features[chunk], batch.masks[chunk], batch.actions[chunk], batch.old_logp[chunk],
                    adv[chunk], targets[chunk], old_values[chunk],
                )
                with _phase(timer, "backward"):
                    _, st, grads = nn.backward(params, mb, spec)
                if not all(np.all(np.isfinite(g)) for g in grads):
                    raise TrainingError("non-finite gradient", st)
                with _phase(timer, "optimizer"):
                    arrays, adam = nn.adam_step(params.arrays(), grads, adam)
                params = params.with_arrays(arrays)
                for k, val in st.items():
                    sums[k] = sums.get(k, 0.0) + val * len(chunk) / n
            epochs_run += 1
            last = sums
            with _phase(timer, "forward"):
                _, logp = nn.actor_forward(params, batch.features, batch.masks)
            new_logp = logp[np.arange(n), batch.actions]
            kl = float(np.mean(batch.old_logp - new_logp))
            if not math.isfinite(kl):
                raise TrainingError("non-finite KL", {"epoch": epoch})
            if abs(kl) >= config.kl_stop:
                break
        params = nn.update_obs_norm(params, batch.features)
        params = replace(params, version=start_params.version + 1)
    except (TrainingError, FloatingPointError) as exc:
        diag = getattr(exc, "diagnostics", {})
        return start_params, start_adam, {"aborted": True, "error": str(exc), **diag}
    stats = {
        "aborted": False,
        "epochs": epochs_run,
        "approx_kl": kl,
        "policy_loss": last.get("policy_loss", 0.0),
        "value_loss": last.get("value_loss", 0.0),
        "entropy": last.get("entropy", 0.0),
        "clip_fraction": last.get("clip_fraction", 0.0),
        "explained_variance": explained_variance(batch.values, batch.returns),
        "value_mean": float(np.mean(batch.values)),
        "return_mean": float(np.mean(batch.returns)),
        "samples": n,
    }
    return params, adam, stats
