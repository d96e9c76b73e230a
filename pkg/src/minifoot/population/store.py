"""Bounded population of policies with Elo ratings and lineage."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional

from ..errors import CheckpointError, ContractError
from .meta import ELO_INIT, ELO_K, elo_update

PROTECTED_TAGS = frozenset({"main", "init", "bot"})


@dataclass
class PopulationEntry:
    policy_id: str
    checkpoint: Optional[str] = None
    elo: float = ELO_INIT
    generation: int = 0
    parent: Optional[str] = None
    reward: Optional[dict] = None
    tags: List[str] = field(default_factory=list)
    order: int = 0

    @property
    def protected(self) -> bool:
        return bool(PROTECTED_TAGS.intersection(self.tags))


class PopulationStore:
    """Entries keyed by policy id, capped at ``max_size``.

    Parameters live in ``params`` (in memory) and optionally on disk at the
    entry's ``checkpoint`` path. When the cap is exceeded, exploiters go
    first (lowest Elo, then oldest), then the oldest unprotected entry;
    entries tagged main/init/bot are never evicted.
    """

    def __init__(self, max_size: Optional[int] = None):
        if max_size is not None and max_size < 1:
            raise ContractError("population size must be positive")
        self.max_size = max_size
        self.entries: Dict[str, PopulationEntry] = {}
        self.params: Dict[str, object] = {}
        self.evicted: List[dict] = []
        self._known: Dict[str, Optional[str]] = {}
        self._counter = 0

    def __len__(self):
        return len(self.entries)

    def __contains__(self, pid):
        return pid in self.entries

    def __iter__(self):
        return iter(self.ids)

    @property
    def ids(self) -> List[str]:
        return sorted(self.entries, key=lambda p: self.entries[p].order)

    def get(self, pid: str) -> PopulationEntry:
        try:
            return self.entries[pid]
        except KeyError:
            raise ContractError(f"unknown policy id {pid!r}") from None

    def add(self, pid: str, params=None, *, checkpoint: Optional[str] = None, generation: int = 0,
            parent: Optional[str] = None, reward: Optional[dict] = None, tags: Iterable[str] = (),
            elo: float = ELO_INIT) -> List[str]:
        """Insert an entry. Returns the ids evicted to respect the cap."""
        if pid in self._known:
            raise ContractError(f"policy id {pid!r} was already used")
        if parent is not None:
            if parent == pid:
                raise ContractError("a policy cannot be its own parent")
            if parent not in self._known:
                raise ContractError(f"unknown parent {parent!r}")
        if not math.isfinite(elo):
            raise ContractError("Elo rating must be finite")
        entry = PopulationEntry(pid, checkpoint, float(elo), int(generation), parent, reward,
                                sorted(set(tags)), self._counter)
        self._counter += 1
        self.entries[pid] = entry
        self._known[pid] = parent
        if params is not None:
            self.params[pid] = params
        return self._enforce_cap(protect=pid)

    def _enforce_cap(self, protect: Optional[str] = None) -> List[str]:
        out = []
        while self.max_size is not None and len(self.entries) > self.max_size:
            victim = self._eviction_candidate(protect)
            if victim is None:
                break
            e = self.entries.pop(victim)
            self.params.pop(victim, None)
            self.evicted.append({"policy_id": victim, "elo": e.elo, "tags": e.tags, "generation": e.generation})
            out.append(victim)
        return out

    def _eviction_candidate(self, protect: Optional[str]) -> Optional[str]:
        pool = [e for e in self.entries.values() if not e.protected and e.policy_id != protect]
        if not pool:
            return None
        exploiters = [e for e in pool if "exploiter" in e.tags]
        if exploiters:
            return min(exploiters, key=lambda e: (e.elo, e.order)).policy_id
        return min(pool, key=lambda e: e.order).policy_id

    def lineage(self, pid: str) -> List[str]:
        """Ancestors of ``pid`` starting with its parent (evicted ancestors included)."""
        if pid not in self._known:
            raise ContractError(f"unknown policy id {pid!r}")
        out, seen = [], {pid}
        cur = self._known[pid]
        while cur is not None:
            if cur in seen:
                raise ContractError("lineage cycle")
            seen.add(cur)
            out.append(cur)
            cur = self._known.get(cur)
        return out

    def with_tag(self, tag: str) -> List[str]:
        return [p for p in self.ids if tag in self.entries[p].tags]

    def ratings(self) -> Dict[str, float]:
        return {p: self.entries[p].elo for p in self.ids}

    def update_elo(self, results, k: float = ELO_K) -> Dict[str, float]:
        """Apply ``(a, b, score_a)`` results with score in {0, 0.5, 1}; unknown ids are ignored."""
        relevant = [(a, b, s) for a, b, s in results if a in self.entries and b in self.entries]
        new = elo_update(self.ratings(), relevant, k)
        for pid, r in new.items():
            if not math.isfinite(r):
                raise ContractError("Elo update produced a non-finite rating")
            self.entries[pid].elo = r
        return new

    def resolve(self, pid: str):
        """Parameters for ``pid``, loading the checkpoint when not in memory."""
        if pid in self.params:
            return self.params[pid]
        entry = self.entries.get(pid)
        if entry is None or entry.checkpoint is None:
            raise CheckpointError(f"no parameters available for {pid!r}")
        from ..nn import load_checkpoint

        params = load_checkpoint(entry.checkpoint)
        self.params[pid] = params
        return params

    # -- manifest ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "max_size": self.max_size,
            "entries": [asdict(self.entries[p]) for p in self.ids],
            "evicted": list(self.evicted),
            "lineage": dict(self._known),
            "counter": self._counter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PopulationStore":
        out = cls(data.get("max_size"))
        out._known = dict(data.get("lineage", {}))
        for raw in data["entries"]:
            e = PopulationEntry(**raw)
            out.entries[e.policy_id] = e
            out._known.setdefault(e.policy_id, e.parent)
        out.evicted = list(data.get("evicted", []))
        out._counter = int(data.get("counter", len(out.entries)))
        for pid in out._known:
            out.lineage(pid)  # raises on cycles
        return out

    def write_manifest(self, path: str) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)

    @classmethod
    def read_manifest(cls, path: str) -> "PopulationStore":
        with open(path) as f:
            return cls.from_dict(json.load(f))
