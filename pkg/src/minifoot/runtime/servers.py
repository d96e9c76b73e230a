"""Shared buffers between rollout workers and the trainer."""
from __future__ import annotations

import collections
import threading
from typing import Callable, Dict, List, Optional

from ..errors import ContractError


class FifoSampler:
    """Consume-once, oldest first."""

    def take(self, queue: collections.deque, n: int) -> list:
        return [queue.popleft() for _ in range(n)]


class DataServer:
    """Bounded segment buffer: many producers, one consumer.

    ``push`` never blocks; when full the oldest segment is evicted and
    counted as dropped. ``pull(n)`` blocks until ``n`` segments are queued
    (or the server shuts down, in which case it returns ``[]``).
    """

    def __init__(self, capacity: int = 1000, sampler=None):
        if capacity < 1:
            raise ContractError("capacity must be positive")
        self.capacity = capacity
        self.sampler = sampler or FifoSampler()
        self._queue: collections.deque = collections.deque()
        self._cond = threading.Condition()
        self._closed = False
        self.produced = 0
        self.consumed = 0
        self.dropped = 0
        self.max_size = 0

    def push(self, segment) -> bool:
        with self._cond:
            if self._closed:
                return False
            self._queue.append(segment)
            self.produced += 1
            while len(self._queue) > self.capacity:
                self._queue.popleft()
                self.dropped += 1
            self.max_size = max(self.max_size, len(self._queue))
            self._cond.notify_all()
            return True

    def pull(self, n: int, timeout: Optional[float] = None) -> list:
        if n < 1:
            raise ContractError("pull size must be positive")
        if n > self.capacity:
            raise ContractError(f"cannot pull {n} segments from a buffer of capacity {self.capacity}")
        with self._cond:
            ok = self._cond.wait_for(lambda: self._closed or len(self._queue) >= n, timeout=timeout)
            if self._closed or not ok:
                return []
            items = self.sampler.take(self._queue, n)
            self.consumed += len(items)
            return items

    def drain(self) -> list:
        """Remove and return everything currently queued."""
        with self._cond:
            items = list(self._queue)
            self._queue.clear()
            self.consumed += len(items)
            return items

    def shutdown(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed

    def __len__(self):
        with self._cond:
            return len(self._queue)

    def counters(self) -> Dict[str, int]:
        with self._cond:
            return {
                "produced": self.produced,
                "consumed": self.consumed,
                "dropped": self.dropped,
                "remaining": len(self._queue),
                "max_size": self.max_size,
            }


class PolicyServer:
    """Latest snapshot per policy id plus the full version history.

    Snapshots are immutable objects; publishing swaps a reference under a
    lock, so readers always see a complete snapshot.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._latest: Dict[str, object] = {}
        self._history: Dict[str, List[object]] = {}
        self._listeners: List[Callable] = []

    def publish(self, policy_id: str, params) -> int:
        with self._lock:
            hist = self._history.setdefault(policy_id, [])
            if hist and params.version <= hist[-1].version:
                raise ContractError(
                    f"version of {policy_id} must increase: {params.version} <= {hist[-1].version}"
                )
            hist.append(params)
            self._latest[policy_id] = params
            listeners = list(self._listeners)
        for fn in listeners:
            fn(policy_id, params)
        return params.version

    def get(self, policy_id: str):
        with self._lock:
            if policy_id not in self._latest:
                raise KeyError(policy_id)
            return self._latest[policy_id]

    def version(self, policy_id: str) -> int:
        return self.get(policy_id).version

    def history(self, policy_id: str) -> list:
        with self._lock:
            return list(self._history.get(policy_id, ()))

    def ids(self) -> List[str]:
        with self._lock:
            return sorted(self._latest)

    def __contains__(self, policy_id) -> bool:
        with self._lock:
            return policy_id in self._latest

    def add_listener(self, fn: Callable) -> None:
        with self._lock:
            self._listeners.append(fn)
