"""Flat run configuration: ``dotted.key = value`` lines plus ``--set`` overrides.

Values are JSON when they parse as JSON and plain strings otherwise, so
``sim.players_per_team = 3``, ``reward.team_goal.neg = 0.2`` and
``opponents = bot:0.5`` all work. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import json
from typing import Any, Dict, Iterable, List, Tuple

from .env import SimConfig
from .errors import ConfigError
from .ippo import PpoConfig
from .reward import RewardSpec, parse_component

# short names accepted for common PPO settings
PPO_ALIASES = {"gamma": "gamma", "lam": "lam", "lambda": "lam", "clip": "clip_eps", "clip_eps": "clip_eps",
               "lr": "lr", "entropy_coef": "entropy_coef", "epochs": "epochs", "kl_stop": "kl_stop"}

TRAIN_KEYS = {
    "name": str, "seed": int, "seeds": int, "workers": int, "batch_size": int, "iterations": int,
    "mode": str, "target_win_rate": float, "win_window": int, "encoder": str, "hidden": list,
    "sample_length": int, "capacity": int, "feature_norm": bool, "popart": bool, "policy_id": str,
    "opponents": str, "checkpoint_every": int,
}

SECTION_KEYS = {
    "psro": {"generations": int, "include_bot": bool, "bot_spec": str, "inherit": bool, "stop_win_rate": float,
             "eval_episodes": int, "population_size": int},
    "league": {"generations": int, "main_iterations": int, "exploiter_iterations": int, "pfsp_exponent": float,
               "eval_episodes": int, "exploiter_target": float, "population_size": int},
    "pipeline": {"stage1_generations": int, "stage1_iterations": int, "stage2_iterations": int,
                 "stage3_generations": int, "main_iterations": int, "exploiter_iterations": int,
                 "eval_episodes": int},
    "eval": {"episodes": int, "greedy": bool},
}

DEFAULT_REWARD = {"team_goal": 1.0}


def parse_value(text: str) -> Any:
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{n}: empty key")
        out[key] = parse_value(value)
    return out


def load_file(path: str) -> Dict[str, Any]:
    try:
        with open(path) as f:
            return parse_lines(f, path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def parse_overrides(items: Iterable[str]) -> Dict[str, Any]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


def parse_opponents(value) -> List[Tuple[str, float]]:
    """``"bot:0.5"`` or ``"bot:0.5=0.7,random=0.3"`` or a list of [spec, prob] pairs."""
    if isinstance(value, list):
        return [(str(s), float(p)) for s, p in value]
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty opponent list")
    out = []
    for part in parts:
        if "=" in part:
            spec, prob = part.rsplit("=", 1)
            try:
                out.append((spec.strip(), float(prob)))
            except ValueError:
                raise ConfigError(f"bad opponent probability in {part!r}") from None
        else:
            out.append((part, None))
    missing = [i for i, (_, p) in enumerate(out) if p is None]
    if missing:
        rest = 1.0 - sum(p for _, p in out if p is not None)
        out = [(s, rest / len(missing) if p is None else p) for s, p in out]
    return out


def _coerce(key: str, value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("true", "1", "yes"):
            return True
        if str(value).lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key} must be a boolean")
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{key} must be a JSON list")
        return value
    try:
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be of type {kind.__name__}, got {value!r}") from None


@dataclasses.dataclass
class RunConfig:
    """Everything a command needs, split by section."""

    train: Dict[str, Any]
    sim: Dict[str, Any]
    ppo: Dict[str, Any]
    reward: Dict[str, Any]
    sections: Dict[str, Dict[str, Any]]
    raw: Dict[str, Any]

    def sim_config(self) -> SimConfig:
        base = {"players_per_team": 3}
        base.update(self.sim)
        return SimConfig.from_dict(base)

    def ppo_config(self) -> PpoConfig:
        return PpoConfig(**self.ppo)

    def reward_spec(self) -> RewardSpec:
        return RewardSpec.from_dict(self.reward or DEFAULT_REWARD)

    def train_config(self, seed: int = None):
        from .runtime.trainer import TrainConfig

        t = self.train
        kwargs = dict(sim=self.sim_config(), ppo=self.ppo_config(), reward=self.reward_spec())
        for key in ("workers", "batch_size", "iterations", "mode", "target_win_rate", "win_window", "encoder",
                    "sample_length", "capacity", "feature_norm", "popart", "policy_id"):
            if key in t:
                kwargs[key] = t[key]
        if "hidden" in t:
            kwargs["hidden"] = tuple(int(h) for h in t["hidden"])
        if "opponents" in t:
            kwargs["opponents"] = parse_opponents(t["opponents"])
        kwargs["seed"] = int(t.get("seed", 0) if seed is None else seed)
        try:
            return TrainConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def snapshot(self) -> Dict[str, Any]:
        return dict(sorted(self.raw.items()))


def build(values: Dict[str, Any]) -> RunConfig:
    """Validate dotted keys and split them into sections."""
    train, sim, ppo, reward = {}, {}, {}, {}
    sections: Dict[str, Dict[str, Any]] = {k: {} for k in SECTION_KEYS}
    sim_fields = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    ppo_fields = {f.name for f in dataclasses.fields(PpoConfig)}
    for key, value in values.items():
        head, _, rest = key.partition(".")
        if not rest:
            if key in TRAIN_KEYS:
                train[key] = _coerce(key, value, TRAIN_KEYS[key]) if value is not None else None
            elif key in PPO_ALIASES:
                ppo[PPO_ALIASES[key]] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        elif head == "sim":
            if rest not in sim_fields:
                raise ConfigError(f"unknown simulator key {key!r}")
            sim[rest] = value
        elif head == "ppo":
            name = PPO_ALIASES.get(rest, rest)
            if name not in ppo_fields:
                raise ConfigError(f"unknown PPO key {key!r}")
            ppo[name] = value
        elif head == "reward":
            comp, _, attr = rest.partition(".")
            parse_component(comp)
            entry = reward.get(comp)
            if attr == "":
                if isinstance(entry, dict):
                    entry["weight"] = float(value)
                else:
                    reward[comp] = float(value)
            elif attr in ("weight", "neg", "pos"):
                if not isinstance(entry, dict):
                    entry = {} if entry is None else {"weight": entry}
                    reward[comp] = entry
                entry[attr] = float(value)
            else:
                raise ConfigError(f"unknown reward attribute in {key!r}")
        elif head in SECTION_KEYS:
            kinds = SECTION_KEYS[head]
            if rest not in kinds:
                raise ConfigError(f"unknown {head} key {key!r}")
            sections[head][rest] = _coerce(key, value, kinds[rest])
        elif head == "spec":
            # pipeline reward sets: spec.<name>.<component>[.neg]
            sections.setdefault("specs", {})
            name, _, comp_key = rest.partition(".")
            if not comp_key:
                raise ConfigError(f"spec key {key!r} needs a component")
            sections["specs"].setdefault(name, {})
            comp, _, attr = comp_key.partition(".")
            parse_component(comp)
            if attr:
                sections["specs"][name].setdefault(comp, {})
                if not isinstance(sections["specs"][name][comp], dict):
                    sections["specs"][name][comp] = {"weight": sections["specs"][name][comp]}
                sections["specs"][name][comp][attr] = float(value)
            else:
                sections["specs"][name][comp] = float(value)
        else:
            raise ConfigError(f"unknown config section in {key!r}")
    cfg = RunConfig(train, sim, ppo, reward, sections, dict(values))
    # validate eagerly so bad values surface before any work starts
    cfg.sim_config()
    try:
        cfg.ppo_config()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.reward_spec()
    if "opponents" in train:
        parse_opponents(train["opponents"])
    return cfg


def load(path: str = None, overrides: Iterable[str] = (), **flags) -> RunConfig:
    values: Dict[str, Any] = {}
    if path:
        values.update(load_file(path))
    values.update(parse_overrides(overrides))
    for k, v in flags.items():
        if v is not None:
            values[k] = v
    return build(values)
