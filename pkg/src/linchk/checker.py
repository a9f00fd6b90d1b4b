"""Backtracking linearizability search over a linked history.

The search walks the entry list from the front. A call entry whose recorded
result agrees with the specification is provisionally linearized: it is
pushed on a stack with the state it was applied to, marked in a bitset and
lifted out of the list, and the walk restarts at the new front. Reaching a
return entry means the pending operation it belongs to can no longer be
postponed, so the most recent provisional choice is undone and the walk
continues after it. An empty list means every operation was linearized.

With a configuration cache (set of ``(linearized bitset, state)`` pairs), a
call is only pushed if it leads to a configuration not seen before; this is
the WGL variant. Without the cache the procedure is plain Wing & Gong (WG).
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

from . import hashing
from .history import HistoryList, lift, unlift
from .specs import Spec, SpecState, state_equal

SCHEMA_VERSION = 1

ALGORITHMS = ("wg", "wgl", "wgl-lru", "wgl-p")


class Verdict(str, Enum):
    LINEARIZABLE = "linearizable"
    NOT_LINEARIZABLE = "not_linearizable"
    TIMEOUT = "timeout"


def bit_tokens(n: int) -> list:
    return [hashing.token(0xB17, i) for i in range(n)]


class Bitset:
    """Fixed-size bit vector with an XOR hash maintained on every toggle."""

    __slots__ = ("size", "bits", "hash", "_tokens")

    def __init__(self, size: int, tokens: Optional[list] = None):
        self.size = size
        self.bits = 0
        self.hash = 0
        self._tokens = tokens if tokens is not None else bit_tokens(size)

    def toggle(self, i: int) -> None:
        if not 0 <= i < self.size:
            raise IndexError(i)
        self.bits ^= 1 << i
        self.hash ^= self._tokens[i]

    def __getitem__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __iter__(self):
        return (i for i in range(self.size) if self.bits >> i & 1)

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def recompute_hash(self) -> int:
        """Hash folded from scratch over the set bits (O(size) reference)."""
        h = 0
        for i in self:
            h ^= self._tokens[i]
        return h

    def copy(self) -> "Bitset":
        b = Bitset(self.size, self._tokens)
        b.bits = self.bits
        b.hash = self.hash
        return b


class Configuration:
    """A cached search configuration: linearized calls plus specification state."""

    __slots__ = ("bits", "bits_hash", "state", "_hash")

    def __init__(self, bits: int, bits_hash: int, state: SpecState):
        self.bits = bits
        self.bits_hash = bits_hash
        self.state = state
        self._hash = hash((bits_hash, state.hash))

    @classmethod
    def of(cls, bitset: Bitset, state: SpecState) -> "Configuration":
        return cls(bitset.bits, bitset.hash, state)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.bits == other.bits and state_equal(self.state, other.state)

    def __repr__(self) -> str:
        return f"Configuration({bin(self.bits)}, {self.state!r})"


class ConfigCache:
    """Set of configurations, unbounded or with least-recently-used eviction.

    Lookups go through the combined (bitset hash, state hash) and are confirmed
    by full equality, so colliding hashes never merge distinct configurations.
    In LRU mode both hits and inserts refresh recency.
    """

    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ValueError("cache capacity must be at least 1")
        self.capacity = capacity
        self._entries: OrderedDict = OrderedDict()
        self.insertions = 0
        self.hits = 0
        self.evictions = 0
        self.peak = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, cfg: Configuration) -> bool:
        return cfg in self._entries

    def insert(self, cfg: Configuration) -> bool:
        """Add ``cfg``; return True iff it was not already present."""
        entries = self._entries
        if cfg in entries:
            self.hits += 1
            if self.capacity is not None:
                entries.move_to_end(cfg)
            return False
        entries[cfg] = None
        self.insertions += 1
        if self.capacity is not None and len(entries) > self.capacity:
            entries.popitem(last=False)
            self.evictions += 1
        if len(entries) > self.peak:
            self.peak = len(entries)
        return True


@dataclass
class CheckerOptions:
    """How to run one search.

    ``cache`` is ``"none"`` (WG), ``"unbounded"`` (WGL) or ``"lru"`` (WGL with
    ``capacity``). ``timeout`` is in seconds. ``debug`` turns on the
    stack/bitset and backtrack-integrity assertions.
    """

    cache: str = "unbounded"
    capacity: Optional[int] = None
    timeout: Optional[float] = None
    max_iterations: Optional[int] = None
    witness: bool = True
    debug: bool = False

    def __post_init__(self):
        if self.cache not in ("none", "unbounded", "lru"):
            raise ValueError(f"unknown cache mode {self.cache!r}")
        if self.cache == "lru":
            if self.capacity is None or self.capacity < 1:
                raise ValueError("LRU cache needs a capacity >= 1")
        elif self.capacity is not None:
            raise ValueError(f"cache capacity only applies to LRU mode, not {self.cache!r}")

    @classmethod
    def for_algo(cls, algo: str, capacity: Optional[int] = None, **kw) -> "CheckerOptions":
        if algo == "wg":
            return cls(cache="none", **kw)
        if algo in ("wgl", "wgl-p"):
            return cls(cache="unbounded", **kw)
        if algo == "wgl-lru":
            return cls(cache="lru", capacity=capacity, **kw)
        raise ValueError(f"unknown algorithm {algo!r} (expected one of {', '.join(ALGORITHMS)})")


@dataclass
class CheckStats:
    iterations: int = 0
    max_stack_height: int = 0
    cache_insertions: int = 0
    cache_hits: int = 0
    evictions: int = 0
    peak_cache_entries: int = 0
    elapsed: float = 0.0


@dataclass(frozen=True)
class PartitionResult:
    key: int
    n_operations: int
    result: "CheckResult"


@dataclass(frozen=True)
class CheckResult:
    verdict: Verdict
    witness: Optional[tuple] = None
    witness_ids: Optional[tuple] = None
    stats: CheckStats = field(default_factory=CheckStats)
    algo: Optional[str] = None
    partitions: tuple = ()
    failing_key: Optional[int] = None
    degenerate: bool = False

    @property
    def linearizable(self) -> bool:
        return self.verdict is Verdict.LINEARIZABLE

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict.value,
            "algo": self.algo,
            "stats": asdict(self.stats),
        }
        if self.witness is not None:
            d["witness"] = [str(op) for op in self.witness]
            d["witness_ids"] = list(self.witness_ids)
        if self.partitions:
            d["degenerate"] = self.degenerate
            d["failing_key"] = self.failing_key
            d["partitions"] = [
                {
                    "key": p.key,
                    "operations": p.n_operations,
                    "verdict": p.result.verdict.value,
                    "stats": asdict(p.result.stats),
                    **({"witness": [str(op) for op in p.result.witness]}
                       if p.result.witness is not None else {}),
                }
                for p in self.partitions
            ]
        return d


def extract_witness(calls: list) -> list:
    """Operations on the calls stack, bottom to top."""
    return [entry.op for entry, _ in calls]


def _pointer_graph(hl: HistoryList) -> list:
    out = []
    node = hl.head
    while node is not None:
        out.append((node, node.prev, node.next))
        node = node.next
    return out


def check(
    hl: HistoryList,
    spec: Spec,
    opts: Optional[CheckerOptions] = None,
    *,
    ops_checked: bool = False,
) -> CheckResult:
    """Decide whether the history in ``hl`` is linearizable with respect to ``spec``.

    ``hl`` is modified during the search and is restored on a negative
    verdict; on a positive verdict every entry has been lifted out. Pass
    ``ops_checked=True`` when every operation is already known to fit
    ``spec``.
    """
    opts = opts or CheckerOptions()
    if not ops_checked:
        for e in hl:
            if e.match is not None:
                spec.check_operation(e.op)

    start = time.perf_counter()
    deadline = start + opts.timeout if opts.timeout is not None else None
    max_iter = opts.max_iterations
    use_cache = opts.cache != "none"
    cache = ConfigCache(opts.capacity if opts.cache == "lru" else None)
    insert = cache.insert
    stats = CheckStats()

    tokens = bit_tokens(hl.n_calls)
    bits = 0
    bits_hash = 0
    s = spec.initial_state()
    apply = spec.apply_unchecked  # operations validated above
    calls: list = []
    head = hl.head
    entry = head.next
    iterations = 0
    height = max_height = 0
    snapshot = _pointer_graph(hl) if opts.debug else None

    def finish(verdict: Verdict) -> CheckResult:
        stats.iterations = iterations
        stats.max_stack_height = max_height
        stats.cache_insertions = cache.insertions
        stats.cache_hits = cache.hits
        stats.evictions = cache.evictions
        stats.peak_cache_entries = cache.peak
        stats.elapsed = time.perf_counter() - start
        witness = ids = None
        if verdict is Verdict.LINEARIZABLE and opts.witness:
            witness = tuple(extract_witness(calls))
            ids = tuple(e.event_id for e, _ in calls)
        return CheckResult(verdict, witness, ids, stats)

    while head.next is not None:
        iterations += 1
        if max_iter is not None and iterations > max_iter:
            return finish(Verdict.TIMEOUT)
        if deadline is not None and iterations & 0xFF == 0 and time.perf_counter() > deadline:
            return finish(Verdict.TIMEOUT)

        if entry.match is not None:
            ok, s2 = apply(s, entry.op)
            eid = entry.entry_id
            if ok and use_cache:
                changed = insert(Configuration(bits | (1 << eid), bits_hash ^ tokens[eid], s2))
            else:
                changed = ok
            if changed:
                calls.append((entry, s))
                s = s2
                bits |= 1 << eid
                bits_hash ^= tokens[eid]
                height += 1
                if height > max_height:
                    max_height = height
                lift(entry)
                entry = head.next
            else:
                entry = entry.next
        else:
            if not calls:
                if snapshot is not None:
                    assert _pointer_graph(hl) == snapshot, "backtracking left the history modified"
                return finish(Verdict.NOT_LINEARIZABLE)
            entry, s = calls.pop()
            height -= 1
            eid = entry.entry_id
            bits ^= 1 << eid
            bits_hash ^= tokens[eid]
            unlift(entry)
            entry = entry.next

        if snapshot is not None:
            assert bin(bits).count("1") == len(calls)
            assert max_height <= hl.n_calls

    return finish(Verdict.LINEARIZABLE)
