"""Wall-time accounting per pipeline phase."""
from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from typing import Dict

ROLLOUT_PHASES = ("env_step", "encoding", "inference", "reward", "push")
TRAIN_PHASES = ("batch_assembly", "forward", "backward", "optimizer")


class PhaseTimer:
    def __init__(self, clock=time.perf_counter):
        self._clock = clock
        self._lock = threading.Lock()
        self._seconds: Dict[str, float] = {}
        self._counts: Dict[str, int] = {}

    @contextmanager
    def phase(self, name: str):
        start = self._clock()
        try:
            yield
        finally:
            self.add(name, self._clock() - start)

    def add(self, name: str, seconds: float, count: int = 1) -> None:
        with self._lock:
            self._seconds[name] = self._seconds.get(name, 0.0) + seconds
            self._counts[name] = self._counts.get(name, 0) + count

    def merge(self, other: "PhaseTimer") -> None:
        for name, secs in other.seconds().items():
            self.add(name, secs, other._counts.get(name, 0))

    def seconds(self) -> Dict[str, float]:
        with self._lock:
            return dict(self._seconds)

    def reset(self) -> None:
        with self._lock:
            self._seconds.clear()
            self._counts.clear()

    def report(self) -> Dict[str, dict]:
        """``{phase: {"seconds", "calls", "fraction"}}``; empty when nothing was timed."""
        with self._lock:
            total = sum(self._seconds.values())
            if not self._seconds:
                return {}
            out = {}
            for name in sorted(self._seconds):
                secs = self._seconds[name]
                out[name] = {
                    "seconds": secs,
                    "calls": self._counts[name],
                    "fraction": secs / total if total > 0 else 1.0 / len(self._seconds),
                }
            return out
