"""Episode replays: in-memory arrays plus a JSON-lines interchange format.

Line 1 is a header ``{"format", "version", "config"}``. Every following
line describes step ``t``: the state s_t, the actions taken at s_t (left
field players first, then right, each in its own team frame) and the
events produced by that transition. The last record holds the final state
with empty ``actions`` and ``events``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..errors import ReplayParseError
from .config import SimConfig
from .state import Event, Mode, Role, WorldState

REPLAY_FORMAT = "minifoot-replay"
REPLAY_VERSION = 2
# version 1 files lack "aerial" and "sprinting"; both default to False
SUPPORTED_VERSIONS = (1, 2)


@dataclass
class Replay:
    """Trajectory of T transitions (T + 1 states)."""

    config: SimConfig
    pos: np.ndarray          # (T+1, 2, P, 2)
    vel: np.ndarray          # (T+1, 2, P, 2)
    ball_pos: np.ndarray     # (T+1, 2)
    ball_vel: np.ndarray     # (T+1, 2)
    owner: List[Optional[tuple]]
    score: np.ndarray        # (T+1, 2)
    mode: np.ndarray         # (T+1,)
    roles: tuple
    actions: np.ndarray      # (T, 2, F)
    events: List[Event] = field(default_factory=list)
    sprinting: Optional[np.ndarray] = None
    aerial: Optional[np.ndarray] = None
    start_step: int = 0

    @property
    def num_transitions(self) -> int:
        return self.actions.shape[0]

    @property
    def num_states(self) -> int:
        return self.pos.shape[0]

    def events_at(self, t: int) -> List[Event]:
        return [e for e in self.events if e.step == self.start_step + t]

    def state_at(self, t: int) -> WorldState:
        """Observable part of state ``t`` (enough for encoders and masks; pass context is lost)."""
        P = self.config.players_per_team
        vel = self.vel[t]
        speed = np.linalg.norm(vel, axis=-1, keepdims=True)
        facing = np.where(speed > 0, vel / np.where(speed > 0, speed, 1.0), 0.0)
        sprint = self.sprinting[t] if self.sprinting is not None else np.zeros((2, P), dtype=bool)
        owner = self.owner[t]
        return WorldState(
            config=self.config,
            step=self.start_step + t,
            pos=self.pos[t].copy(),
            vel=vel.copy(),
            facing=facing,
            sprinting=np.array(sprint, dtype=bool),
            roles=tuple(tuple(Role(int(r)) for r in team) for team in self.roles),
            ball_pos=self.ball_pos[t].copy(),
            ball_vel=self.ball_vel[t].copy(),
            ball_aerial=bool(self.aerial[t]) if self.aerial is not None else False,
            owner=None if owner is None else (int(owner[0]), int(owner[1])),
            score=(int(self.score[t, 0]), int(self.score[t, 1])),
            mode=Mode(int(self.mode[t])),
        )

    def events_by_step(self) -> List[List[Event]]:
        out = [[] for _ in range(self.num_transitions)]
        for e in self.events:
            out[e.step - self.start_step].append(e)
        return out

    # --- construction -----------------------------------------------------
    @classmethod
    def from_states(cls, states: Sequence[WorldState], actions: Sequence, events: Iterable[Event]):
        """Build from T+1 states, T joint actions ``(left, right)`` and the event stream."""
        if len(states) != len(actions) + 1:
            raise ValueError("need exactly one more state than joint actions")
        cfg = states[0].config
        F = cfg.field_players
        acts = np.zeros((len(actions), 2, F), dtype=np.int64)
        for t, (al, ar) in enumerate(actions):
            acts[t, 0] = al
            acts[t, 1] = ar
        return cls(
            config=cfg,
            pos=np.stack([s.pos for s in states]),
            vel=np.stack([s.vel for s in states]),
            ball_pos=np.stack([s.ball_pos for s in states]),
            ball_vel=np.stack([s.ball_vel for s in states]),
            owner=[s.owner for s in states],
            score=np.array([s.score for s in states], dtype=np.int64),
            mode=np.array([int(s.mode) for s in states], dtype=np.int64),
            roles=states[0].roles,
            actions=acts,
            events=list(events),
            sprinting=np.stack([s.sprinting for s in states]),
            aerial=np.array([s.ball_aerial for s in states], dtype=bool),
            start_step=states[0].step,
        )

    # --- serialization ----------------------------------------------------
    def records(self):
        P = self.config.players_per_team
        by_step = self.events_by_step()
        for t in range(self.num_states):
            players = []
            for team in (0, 1):
                for idx in range(P):
                    rec = {
                        "team": team,
                        "idx": idx,
                        "pos": self.pos[t, team, idx].tolist(),
                        "vel": self.vel[t, team, idx].tolist(),
                        "role": int(self.roles[team][idx]),
                    }
                    if self.sprinting is not None:
                        rec["sprinting"] = bool(self.sprinting[t, team, idx])
                    players.append(rec)
            last = t == self.num_transitions
            owner = self.owner[t]
            yield {
                "t": self.start_step + t,
                "mode": Mode(int(self.mode[t])).name.lower(),
                "score": [int(x) for x in self.score[t]],
                "ball": {
                    "pos": self.ball_pos[t].tolist(),
                    "vel": self.ball_vel[t].tolist(),
                    "aerial": bool(self.aerial[t]) if self.aerial is not None else False,
                },
                "owner": None if owner is None else list(owner),
                "players": players,
                "actions": [] if last else [int(a) for a in self.actions[t].ravel()],
                "events": [] if last else [e.to_dict() for e in by_step[t]],
            }

    def write(self, path) -> None:
        header = {"format": REPLAY_FORMAT, "version": REPLAY_VERSION, "config": self.config.to_dict()}
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        os.replace(tmp, path)

    @classmethod
    def read(cls, path) -> "Replay":
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
        return cls.parse(lines, path=str(path))

    @classmethod
    def parse(cls, lines: Sequence[str], path=None) -> "Replay":
        if not lines:
            raise ReplayParseError("empty replay", line=1, path=path)
        header = _load(lines[0], 1, path)
        if header.get("format") != REPLAY_FORMAT:
            raise ReplayParseError("missing replay header", line=1, path=path)
        if header.get("version") not in SUPPORTED_VERSIONS:
            raise ReplayParseError(f"unsupported replay version {header.get('version')!r}", line=1, path=path)
        try:
            config = SimConfig.from_dict(header["config"])
        except Exception as exc:
            raise ReplayParseError(f"bad config: {exc}", line=1, path=path) from exc
        records = [(i + 1, _load(raw, i + 1, path)) for i, raw in enumerate(lines) if i > 0 and raw.strip()]
        if not records:
            raise ReplayParseError("replay has no step records", line=2, path=path)
        return cls.from_records(config, records, path=path)

    @classmethod
    def from_records(cls, config: SimConfig, records, path=None) -> "Replay":
        """``records`` is a list of ``(line_number, dict)`` or plain dicts."""
        records = [r if isinstance(r, tuple) else (i + 1, r) for i, r in enumerate(records)]
        P = config.players_per_team
        F = config.field_players
        n = len(records)
        pos = np.zeros((n, 2, P, 2))
        vel = np.zeros((n, 2, P, 2))
        sprint = np.zeros((n, 2, P), dtype=bool)
        ball_pos = np.zeros((n, 2))
        ball_vel = np.zeros((n, 2))
        aerial = np.zeros(n, dtype=bool)
        score = np.zeros((n, 2), dtype=np.int64)
        mode = np.zeros(n, dtype=np.int64)
        owners = []
        actions = np.zeros((n - 1, 2, F), dtype=np.int64)
        events: List[Event] = []
        roles = [[0] * P, [0] * P]
        start = None
        for k, (line, rec) in enumerate(records):
            try:
                t = int(rec["t"])
                if start is None:
                    start = t
                if t != start + k:
                    raise ValueError(f"expected t={start + k}, got {t}")
                mode[k] = Mode[str(rec["mode"]).upper()]
                score[k] = rec["score"]
                ball_pos[k] = rec["ball"]["pos"]
                ball_vel[k] = rec["ball"]["vel"]
                aerial[k] = bool(rec["ball"].get("aerial", False))
                owners.append(None if rec["owner"] is None else (int(rec["owner"][0]), int(rec["owner"][1])))
                if len(rec["players"]) != 2 * P:
                    raise ValueError(f"expected {2 * P} players, got {len(rec['players'])}")
                for p in rec["players"]:
                    team, idx = int(p["team"]), int(p["idx"])
                    pos[k, team, idx] = p["pos"]
                    vel[k, team, idx] = p["vel"]
                    sprint[k, team, idx] = bool(p.get("sprinting", False))
                    roles[team][idx] = int(p["role"])
                if k < n - 1:
                    acts = rec["actions"]
                    if len(acts) != 2 * F:
                        raise ValueError(f"expected {2 * F} actions, got {len(acts)}")
                    actions[k] = np.asarray(acts, dtype=np.int64).reshape(2, F)
                    for ev in rec["events"]:
                        e = Event.from_dict(ev)
                        if e.step != t:
                            raise ValueError(f"event stamped {e.step} inside record {t}")
                        events.append(e)
                elif rec.get("actions") or rec.get("events"):
                    raise ValueError("final record must not carry actions or events")
            except ReplayParseError:
                raise
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                raise ReplayParseError(f"malformed step record: {exc}", line=line, path=path) from exc
        from .state import Role

        return cls(
            config=config,
            pos=pos,
            vel=vel,
            ball_pos=ball_pos,
            ball_vel=ball_vel,
            owner=owners,
            score=score,
            mode=mode,
            roles=tuple(tuple(Role(r) for r in team) for team in roles),
            actions=actions,
            events=events,
            sprinting=sprint,
            aerial=aerial,
            start_step=start,
        )


def _load(raw: str, line: int, path):
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ReplayParseError(f"invalid JSON: {exc.msg}", line=line, path=path) from exc
    if not isinstance(data, dict):
        raise ReplayParseError("record is not an object", line=line, path=path)
    return data
