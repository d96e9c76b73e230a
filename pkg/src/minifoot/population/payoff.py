"""Empirical payoff tables between population members."""
from __future__ import annotations

import csv
import io
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..errors import ContractError


class PayoffMatrix:
    """Square score / goal-difference tables indexed by policy id.

    Entries are running means over all recorded episodes of the unordered
    pair. ``score[i, j]`` is the mean of +1/0/-1 from i's point of view and
    ``score[j, i]`` is always its exact negation; the diagonal stays 0.
    """

    def __init__(self, ids: Sequence[str] = ()):
        self.ids: List[str] = []
        self._index: Dict[str, int] = {}
        self._score_sum = np.zeros((0, 0))
        self._gd_sum = np.zeros((0, 0))
        self.counts = np.zeros((0, 0), dtype=np.int64)
        self.wins = np.zeros((0, 0), dtype=np.int64)
        for pid in ids:
            self.add(pid)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, pid):
        return pid in self._index

    def index(self, pid: str) -> int:
        try:
            return self._index[pid]
        except KeyError:
            raise ContractError(f"unknown policy id {pid!r}") from None

    def add(self, pid: str) -> int:
        if pid in self._index:
            raise ContractError(f"duplicate policy id {pid!r}")
        n = len(self.ids)
        self.ids.append(pid)
        self._index[pid] = n
        self._score_sum = _grow(self._score_sum)
        self._gd_sum = _grow(self._gd_sum)
        self.counts = _grow(self.counts)
        self.wins = _grow(self.wins)
        return n

    def record(self, a: str, b: str, goals_a: int, goals_b: int) -> None:
        """One finished episode between ``a`` and ``b``."""
        i, j = self.index(a), self.index(b)
        if i == j:
            return
        s = float(np.sign(goals_a - goals_b))
        gd = float(goals_a - goals_b)
        self._score_sum[i, j] += s
        self._score_sum[j, i] -= s
        self._gd_sum[i, j] += gd
        self._gd_sum[j, i] -= gd
        self.counts[i, j] += 1
        self.counts[j, i] += 1
        if s > 0:
            self.wins[i, j] += 1
        elif s < 0:
            self.wins[j, i] += 1

    def set_entry(self, a: str, b: str, score: float, goal_diff: float = 0.0, count: int = 1) -> None:
        """Overwrite an entry with given means (used for synthetic games)."""
        i, j = self.index(a), self.index(b)
        if i == j:
            if score != 0.0:
                raise ContractError("diagonal entries must be zero")
            return
        self._score_sum[i, j] = score * count
        self._score_sum[j, i] = -score * count
        self._gd_sum[i, j] = goal_diff * count
        self._gd_sum[j, i] = -goal_diff * count
        self.counts[i, j] = self.counts[j, i] = count

    def _mean(self, sums):
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(self.counts > 0, sums / np.maximum(self.counts, 1), 0.0)
        # exact antisymmetry regardless of rounding in the division
        upper = np.triu(out, 1)
        return upper - upper.T

    @property
    def score(self) -> np.ndarray:
        return self._mean(self._score_sum)

    @property
    def goal_diff(self) -> np.ndarray:
        return self._mean(self._gd_sum)

    def win_rate(self, a: str, b: str) -> float:
        """Fraction of recorded episodes ``a`` won against ``b`` (0 when none)."""
        i, j = self.index(a), self.index(b)
        n = self.counts[i, j]
        return float(self.wins[i, j] / n) if n else 0.0

    def missing_pairs(self) -> List[tuple]:
        n = len(self.ids)
        return [(self.ids[i], self.ids[j]) for i in range(n) for j in range(i + 1, n) if self.counts[i, j] == 0]

    def submatrix(self, ids: Iterable[str]) -> np.ndarray:
        idx = [self.index(p) for p in ids]
        return self.score[np.ix_(idx, idx)]

    def to_csv(self, which: str = "score") -> str:
        mats = {"score": self.score, "goal_diff": self.goal_diff, "counts": self.counts}
        if which not in mats:
            raise ContractError(f"unknown table {which!r}")
        m = mats[which]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", *self.ids])
        for pid, row in zip(self.ids, m):
            w.writerow([pid, *(repr(float(v)) if which != "counts" else int(v) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_score_csv(cls, text: str) -> "PayoffMatrix":
        """Synthetic payoff table: header of ids, one row per id, antisymmetric values."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows:
            raise ContractError("empty payoff table")
        header = [c.strip() for c in rows[0]]
        if header and header[0].lower() in ("", "policy", "id"):
            ids = header[1:]
            body = [[c.strip() for c in r[1:]] for r in rows[1:]]
        else:
            ids = [f"s{i}" for i in range(len(rows))]
            body = [[c.strip() for c in r] for r in rows]
        try:
            m = np.array([[float(c) for c in r] for r in body])
        except ValueError as exc:
            raise ContractError(f"non-numeric payoff entry: {exc}") from None
        if m.shape != (len(ids), len(ids)):
            raise ContractError(f"payoff table must be square, got {m.shape} for {len(ids)} ids")
        if not np.allclose(m, -m.T, atol=1e-12):
            raise ContractError("payoff table is not antisymmetric")
        out = cls(ids)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                out.set_entry(ids[i], ids[j], float(m[i, j]))
        return out

    def to_dict(self) -> dict:
        return {
            "ids": list(self.ids),
            "score_sum": self._score_sum.tolist(),
            "goal_diff_sum": self._gd_sum.tolist(),
            "counts": self.counts.tolist(),
            "wins": self.wins.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PayoffMatrix":
        out = cls(data["ids"])
        n = len(out.ids)
        out._score_sum = np.array(data["score_sum"], dtype=np.float64).reshape(n, n)
        out._gd_sum = np.array(data["goal_diff_sum"], dtype=np.float64).reshape(n, n)
        out.counts = np.array(data["counts"], dtype=np.int64).reshape(n, n)
        out.wins = np.array(data["wins"], dtype=np.int64).reshape(n, n)
        return out


def _grow(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=m.dtype)
    out[:n, :n] = m
    return out
