"""Dense actor-critic networks with hand-written gradients.

Everything is float64. An MLP is a list of ``(W, b)`` layers with ``W`` of
shape ``(fan_in, fan_out)`` and ReLU between layers; the last layer is
linear. The actor emits 14 logits, the critic one normalised value.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CheckpointError, ContractError, TrainingError

DEFAULT_HIDDEN = (256, 128, 64)
NUM_LOGITS = 14
SIGMA_FLOOR = 1e-6
FEATURE_CLIP = 5.0
# smallest feature std used when standardising inputs
FEATURE_STD_FLOOR = 1e-4


# ---------------------------------------------------------------------------
# MLP


@dataclass(frozen=True, eq=False)
class Mlp:
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        prev = None
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ContractError("layer shapes do not chain")
            if prev is not None and W.shape[0] != prev:
                raise ContractError("layer shapes do not chain")
            prev = W.shape[1]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    def arrays(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "Mlp":
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]))

    def forward(self, x: np.ndarray):
        """Returns (output, activations) with activations[k] the input of layer k."""
        acts = [x]
        h = x
        n = len(self.weights)
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < n - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, dout: np.ndarray) -> List[np.ndarray]:
        """Gradients (dW0, db0, dW1, ...) given d(loss)/d(output)."""
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        g = dout
        for k in range(len(self.weights) - 1, -1, -1):
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.weights[k].T) * (acts[k] > 0.0)
        return grads


def orthogonal(shape, gain: float, rng: np.random.Generator) -> np.ndarray:
    """QR-based orthogonal matrix: orthonormal rows or columns, scaled by ``gain``."""
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    # sign fix makes the distribution uniform (Haar)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_orthogonal(sizes: Sequence[int], gain: float = 1.0, seed: int = 0) -> Mlp:
    if gain <= 0:
        raise ContractError("gain must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(orthogonal((fan_in, fan_out), gain, rng))
        biases.append(np.zeros(fan_out))
    return Mlp(tuple(weights), tuple(biases))


# ---------------------------------------------------------------------------
# running moments (feature standardisation and return normalisation)


@dataclass(frozen=True, eq=False)
class RunningNorm:
    """Debiased exponential moving mean / second moment.

    ``weight`` tracks the total mass of the EMA so that early estimates are
    not biased toward the zero initialisation.
    """

    mean_acc: np.ndarray
    sq_acc: np.ndarray
    weight: float = 0.0
    beta: float = 0.99999

    @classmethod
    def create(cls, dim: Optional[int] = None, beta: float = 0.99999) -> "RunningNorm":
        shape = () if dim is None else (dim,)
        return cls(np.zeros(shape), np.zeros(shape), 0.0, beta)

    @property
    def mean(self) -> np.ndarray:
        if self.weight <= 0.0:
            return np.zeros_like(self.mean_acc)
        return self.mean_acc / self.weight

    @property
    def var(self) -> np.ndarray:
        if self.weight <= 0.0:
            return np.ones_like(self.sq_acc)
        m = self.mean
        return np.maximum(self.sq_acc / self.weight - m * m, 0.0)

    def std(self, floor: float = SIGMA_FLOOR) -> np.ndarray:
        return np.maximum(np.sqrt(self.var), floor)

    def update(self, x: np.ndarray) -> "RunningNorm":
        """Fold in a batch of samples (first axis) as if seen one at a time with equal weight."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise TrainingError("non-finite values in normaliser update")
        n = x.shape[0]
        if n == 0 or self.beta >= 1.0:
            return self
        a = 1.0 - self.beta ** n
        return replace(
            self,
            mean_acc=(1.0 - a) * self.mean_acc + a * x.mean(axis=0),
            sq_acc=(1.0 - a) * self.sq_acc + a * (x * x).mean(axis=0),
            weight=(1.0 - a) * self.weight + a,
        )

    def arrays(self) -> List[np.ndarray]:
        return [self.mean_acc, self.sq_acc, np.array([self.weight, self.beta])]

    @classmethod
    def from_arrays(cls, arrays) -> "RunningNorm":
        mean_acc, sq_acc, extra = arrays
        return cls(np.array(mean_acc), np.array(sq_acc), float(extra[0]), float(extra[1]))


def normalize_features(norm: Optional[RunningNorm], x: np.ndarray) -> np.ndarray:
    if norm is None or norm.weight <= 0.0:
        return x
    z = (x - norm.mean) / norm.std(FEATURE_STD_FLOOR)
    return np.clip(z, -FEATURE_CLIP, FEATURE_CLIP)


# ---------------------------------------------------------------------------
# policy parameters


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Shared actor and critic plus normaliser state. Treated as immutable."""

    actor: Mlp
    critic: Mlp
    obs_norm: Optional[RunningNorm] = None
    value_norm: Optional[RunningNorm] = None
    version: int = 0

    @property
    def input_dim(self) -> int:
        return self.actor.sizes[0]

    def arrays(self) -> List[np.ndarray]:
        """Trainable arrays: actor layers then critic layers."""
        return self.actor.arrays() + self.critic.arrays()

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "PolicyParams":
        na = 2 * len(self.actor.weights)
        return replace(self, actor=Mlp.from_arrays(arrays[:na]), critic=Mlp.from_arrays(arrays[na:]))

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, arr in _named_arrays(self):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(str(self.version).encode())
        return h.hexdigest()


def init_policy(
    input_dim: int,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    seed: int = 0,
    gain: float = 1.0,
    feature_norm: bool = True,
    popart: bool = True,
    beta: float = 0.99999,
) -> PolicyParams:
    sizes_a = (input_dim, *hidden, NUM_LOGITS)
    sizes_c = (input_dim, *hidden, 1)
    ss = np.random.SeedSequence(seed)
    sa, sc = ss.spawn(2)
    actor = init_orthogonal(sizes_a, gain, int(sa.generate_state(1)[0]))
    critic = init_orthogonal(sizes_c, gain, int(sc.generate_state(1)[0]))
    return PolicyParams(
        actor=actor,
        critic=critic,
        obs_norm=RunningNorm.create(input_dim, beta) if feature_norm else None,
        value_norm=RunningNorm.create(None, beta) if popart else None,
        version=0,
    )


# ---------------------------------------------------------------------------
# forward passes


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray):
    mask = np.asarray(mask, dtype=bool)
    if not np.all(mask.any(axis=-1)):
        raise ContractError("every action mask needs at least one legal action")
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    e = np.exp(shifted)
    total = e.sum(axis=-1, keepdims=True)
    probs = e / total
    logp = np.where(mask, shifted - np.log(total), -np.inf)
    return probs, logp


def actor_logits(params: PolicyParams, features: np.ndarray):
    x = normalize_features(params.obs_norm, np.atleast_2d(features))
    return params.actor.forward(x)


def actor_forward(params: PolicyParams, features: np.ndarray, mask: np.ndarray):
    """Action probabilities and log-probabilities (masked entries: 0 and -inf)."""
    single = np.ndim(features) == 1
    logits, _ = actor_logits(params, features)
    probs, logp = masked_log_softmax(logits, np.atleast_2d(mask))
    if single:
        return probs[0], logp[0]
    return probs, logp


def critic_raw(params: PolicyParams, features: np.ndarray):
    x = normalize_features(params.obs_norm, np.atleast_2d(features))
    out, acts = params.critic.forward(x)
    return out[:, 0], acts


def denormalize(params: PolicyParams, v: np.ndarray) -> np.ndarray:
    norm = params.value_norm
    if norm is None or norm.weight <= 0.0:
        return v
    return norm.mean + norm.std() * v


def normalize_values(params: PolicyParams, v: np.ndarray) -> np.ndarray:
    norm = params.value_norm
    if norm is None or norm.weight <= 0.0:
        return np.asarray(v, dtype=np.float64)
    return (v - norm.mean) / norm.std()


def critic_forward(params: PolicyParams, features: np.ndarray):
    """Value estimate in return units."""
    single = np.ndim(features) == 1
    raw, _ = critic_raw(params, features)
    v = denormalize(params, raw)
    return float(v[0]) if single else v


def policy_step(params: PolicyParams, features: np.ndarray, masks: np.ndarray, rng: np.random.Generator,
                with_value: bool = True):
    """Sample one action per row. Returns (actions, log-probs, values or None)."""
    x = normalize_features(params.obs_norm, features)
    logits, _ = params.actor.forward(x)
    probs, logp = masked_log_softmax(logits, masks)
    u = rng.random(len(probs))
    cdf = np.cumsum(probs, axis=1)
    actions = np.minimum((cdf < u[:, None] * cdf[:, -1:]).sum(axis=1), probs.shape[1] - 1)
    # guard against landing on a zero-probability entry through rounding
    for i, a in enumerate(actions):
        if not masks[i, a]:
            actions[i] = int(np.flatnonzero(masks[i])[-1])
    chosen = logp[np.arange(len(actions)), actions]
    if not with_value:
        return actions, chosen, None
    values, _ = params.critic.forward(x)
    return actions, chosen, denormalize(params, values[:, 0])


# ---------------------------------------------------------------------------
# loss gradients


@dataclass(frozen=True)
class LossSpec:
    clip_eps: float = 0.2
    value_clip: bool = True
    value_clip_eps: float = 0.2
    entropy_coef: float = 1e-4
    value_coef: float = 1.0


@dataclass
class LossBatch:
    """Inputs of the PPO loss. Values and targets are in normalised units."""

    features: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray
    targets: np.ndarray
    old_values: np.ndarray


def backward(params: PolicyParams, batch: LossBatch, spec: LossSpec):
    """Total loss, its parts and gradients w.r.t. ``params.arrays()``.

    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy
    """
    n = len(batch.actions)
    if n == 0:
        raise ContractError("empty batch")
    x = normalize_features(params.obs_norm, batch.features)
    logits, a_acts = params.actor.forward(x)
    probs, logp_all = masked_log_softmax(logits, batch.masks)
    rows = np.arange(n)
    logp = logp_all[rows, batch.actions]
    if not np.all(np.isfinite(logp)):
        raise TrainingError("log-probability of a taken action is not finite", {"bad": int((~np.isfinite(logp)).sum())})
    ratio = np.exp(logp - batch.old_logp)
    adv = batch.advantages
    eps = spec.clip_eps
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    surr1 = ratio * adv
    surr2 = clipped * adv
    use_unclipped = surr1 <= surr2
    policy_loss = -float(np.mean(np.minimum(surr1, surr2)))
    # d(policy_loss)/d(logp) per sample
    d_logp = np.where(use_unclipped, -ratio * adv, 0.0) / n

    safe_logp = np.where(batch.masks, logp_all, 0.0)
    ent_rows = -(probs * safe_logp).sum(axis=1)
    entropy = float(ent_rows.mean())

    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    d_logits = d_logp[:, None] * (onehot - probs)
    # dH_i/dz_j = -p_j (log p_j + H_i), zero on masked entries
    d_ent = -probs * (safe_logp + ent_rows[:, None])
    d_logits += (-spec.entropy_coef / n) * d_ent
    d_logits = np.where(batch.masks, d_logits, 0.0)

    v_out, c_acts = params.critic.forward(x)
    v = v_out[:, 0]
    err1 = v - batch.targets
    sq1 = err1 * err1
    if spec.value_clip:
        v_clip = batch.old_values + np.clip(v - batch.old_values, -spec.value_clip_eps, spec.value_clip_eps)
        err2 = v_clip - batch.targets
        sq2 = err2 * err2
        inside = np.abs(v - batch.old_values) <= spec.value_clip_eps
        take1 = sq1 <= sq2
        value_loss = float(np.mean(np.minimum(sq1, sq2)))
        dv = np.where(take1, 2.0 * err1, np.where(inside, 2.0 * err2, 0.0)) / n
    else:
        value_loss = float(np.mean(sq1))
        dv = 2.0 * err1 / n
    dv = spec.value_coef * dv

    total = policy_loss + spec.value_coef * value_loss - spec.entropy_coef * entropy
    if not math.isfinite(total):
        raise TrainingError(
            "non-finite loss",
            {"policy_loss": policy_loss, "value_loss": value_loss, "entropy": entropy},
        )
    grads = params.actor.backward(a_acts, d_logits) + params.critic.backward(c_acts, dv[:, None])
    stats = {
        "loss": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
        "approx_kl": float(np.mean(batch.old_logp - logp)),
    }
    return total, stats, grads


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True, eq=False)
class AdamState:
    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]
    t: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5

    @classmethod
    def create(cls, arrays: Sequence[np.ndarray], lr: float = 5e-4, beta1=0.9, beta2=0.999, eps=1e-5):
        zeros = tuple(np.zeros_like(a) for a in arrays)
        return cls(zeros, tuple(np.zeros_like(a) for a in arrays), 0, lr, beta1, beta2, eps)


def adam_step(arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ContractError("parameter, gradient and optimiser shapes differ")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, replace(state, m=tuple(new_m), v=tuple(new_v), t=t)


# ---------------------------------------------------------------------------
# return normalisation


def popart_update(params: PolicyParams, returns: np.ndarray) -> PolicyParams:
    """Update return statistics and rescale the critic head so outputs in return units are unchanged."""
    norm = params.value_norm
    if norm is None:
        return params
    returns = np.asarray(returns, dtype=np.float64).ravel()
    new = norm.update(returns)
    if norm.weight <= 0.0:
        mu_old, sigma_old = 0.0, 1.0
    else:
        mu_old, sigma_old = float(norm.mean), float(norm.std())
    mu_new, sigma_new = float(new.mean), float(new.std())
    W, b = params.critic.weights[-1], params.critic.biases[-1]
    W2 = W * (sigma_old / sigma_new)
    b2 = (sigma_old * b + mu_old - mu_new) / sigma_new
    critic = Mlp(params.critic.weights[:-1] + (W2,), params.critic.biases[:-1] + (b2,))
    return replace(params, critic=critic, value_norm=new)


def update_obs_norm(params: PolicyParams, features: np.ndarray) -> PolicyParams:
    if params.obs_norm is None:
        return params
    return replace(params, obs_norm=params.obs_norm.update(features))


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"MFCKPT01"


def _named_arrays(params: PolicyParams):
    out = []
    for k, a in enumerate(params.actor.arrays()):
        out.append((f"actor.{k}", a))
    for k, a in enumerate(params.critic.arrays()):
        out.append((f"critic.{k}", a))
    for tag, norm in (("obs_norm", params.obs_norm), ("value_norm", params.value_norm)):
        if norm is not None:
            for k, a in enumerate(norm.arrays()):
                out.append((f"{tag}.{k}", np.asarray(a, dtype=np.float64)))
    return out


def checkpoint_bytes(params: PolicyParams, meta: Optional[dict] = None) -> bytes:
    named = _named_arrays(params)
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in named)
    header = {
        "version": params.version,
        "actor_sizes": list(params.actor.sizes),
        "critic_sizes": list(params.critic.sizes),
        "arrays": [[name, list(np.shape(a))] for name, a in named],
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": meta or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    return _MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + payload


def save_checkpoint(path, params: PolicyParams, meta: Optional[dict] = None) -> str:
    data = checkpoint_bytes(params, meta)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC) + 8)
        if len(head) < len(_MAGIC) + 8 or head[: len(_MAGIC)] != _MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (n,) = struct.unpack("<Q", head[len(_MAGIC):])
        return json.loads(fh.read(n))


def load_checkpoint(path, expect_input_dim: Optional[int] = None, expect_hidden=None) -> PolicyParams:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return params_from_bytes(data, expect_input_dim, expect_hidden, source=str(path))


def params_from_bytes(data: bytes, expect_input_dim=None, expect_hidden=None, source="<bytes>") -> PolicyParams:
    if data[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file")
    (n,) = struct.unpack("<Q", data[len(_MAGIC): len(_MAGIC) + 8])
    start = len(_MAGIC) + 8
    try:
        header = json.loads(data[start: start + n])
    except ValueError as exc:
        raise CheckpointError(f"{source}: corrupted header") from exc
    payload = data[start + n:]
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError(f"{source}: content hash mismatch")
    sizes = header["actor_sizes"]
    if expect_input_dim is not None and sizes[0] != expect_input_dim:
        raise CheckpointError(f"{source}: input dim {sizes[0]} != expected {expect_input_dim}")
    if expect_hidden is not None and list(sizes[1:-1]) != list(expect_hidden):
        raise CheckpointError(f"{source}: hidden sizes {sizes[1:-1]} != expected {list(expect_hidden)}")
    arrays = {}
    offset = 0
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(np.float64)
        arrays[name] = arr.reshape(shape)
        offset += 8 * count
    if offset != len(payload):
        raise CheckpointError(f"{source}: payload size mismatch")

    def group(prefix):
        keys = sorted((k for k in arrays if k.startswith(prefix + ".")), key=lambda k: int(k.split(".")[1]))
        return [arrays[k] for k in keys]

    actor = Mlp.from_arrays(group("actor"))
    critic = Mlp.from_arrays(group("critic"))
    if list(actor.sizes) != sizes or list(critic.sizes) != header["critic_sizes"]:
        raise CheckpointError(f"{source}: architecture header does not match arrays")
    obs = group("obs_norm")
    val = group("value_norm")
    return PolicyParams(
        actor=actor,
        critic=critic,
        obs_norm=RunningNorm.from_arrays(obs) if obs else None,
        value_norm=RunningNorm.from_arrays([v.reshape(()) if i < 2 else v for i, v in enumerate(val)]) if val else None,
        version=int(header["version"]),
    )
