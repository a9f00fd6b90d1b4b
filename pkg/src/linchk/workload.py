"""Multi-threaded workload generator for concurrent sets.

Worker threads issue pseudo-random insert/remove/contains operations against
one shared set implementation while a recorder appends call and return
events to a single global log. A call is logged before the implementation is
invoked and its return after the implementation has returned, so every
happens-before edge in the recorded history was real (the recorder can only
miss edges, which never causes a false alarm).

Each thread draws its operations from its own ``random.Random`` (Mersenne
Twister) seeded with ``seed * 1_000_003 + thread_index``; the per-thread
operation streams are reproducible, the interleaving is not.
"""

from __future__ import annotations

import itertools
import random
import sys
import threading
import time
from dataclasses import dataclass
from typing import Optional

from .history import CALL, RET, Event, History, Operation, call, ret

SET_OPS = ("insert", "remove", "contains")


def _yield() -> None:
    time.sleep(0)


class CoarseLockSet:
    """Correct: every operation holds one global lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items = set()

    def insert(self, k: int) -> bool:
        with self._lock:
            if k in self._items:
                return False
            self._items.add(k)
            return True

    def remove(self, k: int) -> bool:
        with self._lock:
            if k not in self._items:
                return False
            self._items.remove(k)
            return True

    def contains(self, k: int) -> bool:
        with self._lock:
            return k in self._items


class StripedLockSet:
    """Correct: keys are spread over independently locked stripes."""

    def __init__(self, stripes: int = 8):
        self._locks = [threading.Lock() for _ in range(stripes)]
        self._items = [set() for _ in range(stripes)]

    def _stripe(self, k: int) -> int:
        return k % len(self._locks)

    def insert(self, k: int) -> bool:
        i = self._stripe(k)
        with self._locks[i]:
            if k in self._items[i]:
                return False
            self._items[i].add(k)
            return True

    def remove(self, k: int) -> bool:
        i = self._stripe(k)
        with self._locks[i]:
            if k not in self._items[i]:
                return False
            self._items[i].remove(k)
            return True

    def contains(self, k: int) -> bool:
        i = self._stripe(k)
        with self._locks[i]:
            return k in self._items[i]


class NonatomicSet:
    """Faulty: insert and remove test membership and act on it non-atomically."""

    def __init__(self):
        self._items = set()

    def insert(self, k: int) -> bool:
        present = k in self._items
        _yield()
        if present:
            return False
        self._items.add(k)
        return True

    def remove(self, k: int) -> bool:
        present = k in self._items
        _yield()
        if not present:
            return False
        self._items.discard(k)
        return True

    def contains(self, k: int) -> bool:
        return k in self._items


class StaleReadSet:
    """Faulty: contains reads a snapshot that is only republished every few writes."""

    def __init__(self, publish_every: int = 3):
        self._lock = threading.Lock()
        self._items = set()
        self._snapshot = frozenset()
        self._writes = 0
        self._publish_every = publish_every

    def _wrote(self) -> None:
        self._writes += 1
        if self._writes % self._publish_every == 0:
            self._snapshot = frozenset(self._items)

    def insert(self, k: int) -> bool:
        with self._lock:
            if k in self._items:
                return False
            self._items.add(k)
            self._wrote()
            return True

    def remove(self, k: int) -> bool:
        with self._lock:
            if k not in self._items:
                return False
            self._items.remove(k)
            self._wrote()
            return True

    def contains(self, k: int) -> bool:
        return k in self._snapshot


IMPLEMENTATIONS = {
    "coarse": CoarseLockSet,
    "striped": StripedLockSet,
    "nonatomic": NonatomicSet,
    "stale": StaleReadSet,
}
CORRECT_IMPLEMENTATIONS = ("coarse", "striped")


@dataclass
class WorkloadConfig:
    threads: int = 4
    ops_per_thread: int = 5000
    key_range: int = 24
    op_mix: tuple = (1.0, 1.0, 1.0)  # insert, remove, contains
    seed: int = 0
    impl: str = "coarse"
    # GIL switch interval while workers run; small values interleave more
    switch_interval: Optional[float] = 5e-5
    # yield the interpreter right after logging a call and right before logging
    # its return, standing in for invocation/response latency; without it the
    # GIL runs most operations back to back and histories are nearly sequential
    latency: bool = True

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.ops_per_thread < 0:
            raise ValueError("ops_per_thread must be >= 0")
        if self.key_range < 1:
            raise ValueError("key_range must be >= 1")
        if len(self.op_mix) != 3 or any(w < 0 for w in self.op_mix) or sum(self.op_mix) <= 0:
            raise ValueError("op_mix needs three non-negative weights with a positive sum")
        if self.impl not in IMPLEMENTATIONS:
            raise ValueError(f"unknown implementation {self.impl!r}")


class Recorder:
    """Append-only global event log shared by all worker threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._log: list = []
        self._ids = itertools.count()
        self._ops: dict = {}

    def begin(self, name: str, args: tuple) -> int:
        with self._lock:
            oid = next(self._ids)
            self._ops[oid] = (name, args, None)
            self._log.append((CALL, oid))
        return oid

    def end(self, oid: int, result) -> None:
        with self._lock:
            name, args, _ = self._ops[oid]
            self._ops[oid] = (name, args, result)
            self._log.append((RET, oid))

    def history(self, obj: str = "set") -> History:
        with self._lock:
            ops = {oid: Operation(name, args, res) for oid, (name, args, res) in self._ops.items()}
            return History(tuple(Event(kind, oid, obj, ops[oid]) for kind, oid in self._log))


def thread_rng(seed: int, index: int) -> random.Random:
    return random.Random(seed * 1_000_003 + index)


def operation_stream(cfg: WorkloadConfig, index: int) -> list:
    """The (name, key) pairs thread ``index`` will issue."""
    rng = thread_rng(cfg.seed, index)
    names = rng.choices(SET_OPS, weights=cfg.op_mix, k=cfg.ops_per_thread)
    return [(name, rng.randrange(cfg.key_range)) for name in names]


def run_workload(cfg: WorkloadConfig) -> History:
    """Run ``cfg.threads`` workers against a fresh implementation; return the history."""
    impl = IMPLEMENTATIONS[cfg.impl]()
    rec = Recorder()
    streams = [operation_stream(cfg, i) for i in range(cfg.threads)]
    barrier = threading.Barrier(cfg.threads)
    errors: list = []

    def worker(stream):
        try:
            barrier.wait()
            for name, k in stream:
                oid = rec.begin(name, (k,))
                if cfg.latency:
                    _yield()
                result = getattr(impl, name)(k)
                if cfg.latency:
                    _yield()
                rec.end(oid, result)
        except BaseException as exc:  # surfaced after join
            errors.append(exc)

    saved = sys.getswitchinterval()
    if cfg.switch_interval is not None:
        sys.setswitchinterval(cfg.switch_interval)
    try:
        threads = [threading.Thread(target=worker, args=(s,)) for s in streams]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    finally:
        sys.setswitchinterval(saved)
    if errors:
        raise RuntimeError("workload thread failed") from errors[0]
    return rec.history()


def make_violation(kind: str) -> History:
    """A small non-linearizable set history.

    ``double_insert``: two concurrent insert(1) both return true.
    ``lost_remove``: after insert(1), two concurrent remove(1) both return true.
    ``stale_contains``: contains(1) returns false after insert(1) completed.
    """
    if kind == "double_insert":
        events = [
            call(1, "set", "insert", [1], True),
            call(2, "set", "insert", [1], True),
            ret(1, "set", "insert", [1], True),
            ret(2, "set", "insert", [1], True),
        ]
    elif kind == "lost_remove":
        events = [
            call(1, "set", "insert", [1], True),
            ret(1, "set", "insert", [1], True),
            call(2, "set", "remove", [1], True),
            call(3, "set", "remove", [1], True),
            ret(2, "set", "remove", [1], True),
            ret(3, "set", "remove", [1], True),
        ]
    elif kind == "stale_contains":
        events = [
            call(1, "set", "insert", [1], True),
            ret(1, "set", "insert", [1], True),
            call(2, "set", "contains", [1], False),
            ret(2, "set", "contains", [1], False),
        ]
    else:
        raise ValueError(f"unknown violation kind {kind!r}")
    return History(tuple(events))


VIOLATIONS = ("double_insert", "lost_remove", "stale_contains")
