"""Split a history by partition key and check the pieces independently.

For a specification where operations on different keys never influence each
other's results (set and map keys, array indexes), a history is linearizable
exactly when each per-key sub-history is. The partitioner relinks the entry
list into one chain per key in a single pass; every sub-history keeps the
original relative order, so its happens-before relation is the restriction
of the original one.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .checker import (
    CheckerOptions,
    CheckResult,
    CheckStats,
    PartitionResult,
    Verdict,
    check,
)
from .history import CALL, EntryNode, History, HistoryList, build_linked
from .specs import Spec, SpecError


@dataclass
class PartitionSet:
    subs: list
    keys: list  # keys[i] is the raw partition key of subs[i]


def count_partitions(h: History, spec: Spec) -> tuple:
    """Return ``(n, key_map)`` mapping each distinct key to a dense index in ``[0, n)``.

    Indexes follow the order in which keys are first called.
    """
    if not spec.partitionable:
        raise SpecError(f"{spec} is not partitionable")
    key_map: dict = {}
    for ev in h:
        if ev.kind == CALL:
            k = spec.partition_key(ev.op)
            if k not in key_map:
                key_map[k] = len(key_map)
    return len(key_map), key_map


def partition(entry: Optional[EntryNode], n: int, index: Callable[[EntryNode], int]) -> list:
    """Relink the list starting at ``entry`` into ``n`` chains; return their sentinel heads.

    ``index(e)`` must give the same value for a call and its return. The
    input list is consumed. Call entries are renumbered densely per chain so
    each chain satisfies the checker's entry-id precondition.
    """
    if n < 1:
        raise ValueError("n must be positive")
    heads = [EntryNode(-1, None, "") for _ in range(n)]
    tails = list(heads)
    counts = [0] * n
    while entry is not None:
        i = index(entry) % n
        tail = tails[i]
        tail.next = entry
        next_entry = entry.next
        entry.prev = tail
        entry.next = None
        tails[i] = entry
        if entry.match is not None:
            entry.entry_id = counts[i]
            entry.match.entry_id = counts[i]
            counts[i] += 1
        entry = next_entry
    return [HistoryList(head, c) for head, c in zip(heads, counts)]


def partition_history(h: History, spec: Spec) -> PartitionSet:
    """Build the linked form of ``h`` and split it by ``spec``'s partition key.

    Key indexes are assigned exactly as :func:`count_partitions` assigns them,
    in the same pass that records each entry's partition.
    """
    if not spec.partitionable:
        raise SpecError(f"{spec} is not partitionable")
    hl = build_linked(h)
    key_map: dict = {}
    index: dict = {}
    key_of = spec.partition_key
    e = hl.head.next
    while e is not None:
        if e.match is not None:
            k = key_of(e.op)
            i = key_map.get(k)
            if i is None:
                i = key_map[k] = len(key_map)
            # the return reuses its call's index
            index[e] = index[e.match] = i
        e = e.next
    if not key_map:
        return PartitionSet([], [])
    subs = partition(hl.head.next, len(key_map), index.__getitem__)
    hl.head.next = None
    return PartitionSet(subs, list(key_map))


def _aggregate_stats(results: list, workers: int, elapsed: float) -> CheckStats:
    peaks = sorted((r.stats.peak_cache_entries for r in results), reverse=True)
    return CheckStats(
        iterations=sum(r.stats.iterations for r in results),
        max_stack_height=max((r.stats.max_stack_height for r in results), default=0),
        cache_insertions=sum(r.stats.cache_insertions for r in results),
        cache_hits=sum(r.stats.cache_hits for r in results),
        evictions=sum(r.stats.evictions for r in results),
        # caches are released between sub-checks; at most `workers` are live at once
        peak_cache_entries=sum(peaks[:max(workers, 1)]),
        elapsed=elapsed,
    )


def check_compositional(
    h: History,
    spec: Spec,
    opts: Optional[CheckerOptions] = None,
    parallel: int = 1,
) -> CheckResult:
    """Check ``h`` one partition at a time.

    The verdict is linearizable iff every partition is; otherwise the first
    failing partition key is reported. A timeout in any partition yields a
    timeout verdict unless some other partition failed outright.
    ``opts.timeout`` bounds the whole run, not each partition.
    """
    opts = opts or CheckerOptions()
    start = time.perf_counter()
    deadline = start + opts.timeout if opts.timeout is not None else None
    ps = partition_history(h, spec)

    def run(sub: HistoryList) -> CheckResult:
        sub_opts = opts
        if deadline is not None:
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return CheckResult(Verdict.TIMEOUT)
            sub_opts = replace(opts, timeout=remaining)
        return check(sub, spec, sub_opts, ops_checked=True)

    workers = max(1, min(parallel, len(ps.subs)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, ps.subs))
    else:
        results = [run(sub) for sub in ps.subs]

    parts = tuple(
        PartitionResult(key, sub.n_calls, r) for key, sub, r in zip(ps.keys, ps.subs, results)
    )
    failing = next((p.key for p in parts if p.result.verdict is Verdict.NOT_LINEARIZABLE), None)
    if failing is not None:
        verdict = Verdict.NOT_LINEARIZABLE
    elif any(p.result.verdict is Verdict.TIMEOUT for p in parts):
        verdict = Verdict.TIMEOUT
    else:
        verdict = Verdict.LINEARIZABLE

    witness = ids = None
    if verdict is Verdict.LINEARIZABLE and opts.witness and len(parts) <= 1:
        # a single partition's witness is a witness for the whole history
        witness = parts[0].result.witness if parts else ()
        ids = parts[0].result.witness_ids if parts else ()
    stats = _aggregate_stats(results, workers, time.perf_counter() - start)
    return CheckResult(
        verdict,
        witness,
        ids,
        stats,
        algo="wgl-p",
        partitions=parts,
        failing_key=failing,
        degenerate=len(parts) <= 1,
    )


def check_history(
    h: History,
    spec: Spec,
    algo: str = "wgl",
    capacity: Optional[int] = None,
    timeout: Optional[float] = None,
    witness: bool = True,
    parallel: int = 1,
    max_iterations: Optional[int] = None,
    debug: bool = False,
) -> CheckResult:
    """Check a validated history with one of ``wg``, ``wgl``, ``wgl-lru`` or ``wgl-p``."""
    opts = CheckerOptions.for_algo(
        algo, capacity, timeout=timeout, witness=witness,
        max_iterations=max_iterations, debug=debug,
    )
    if algo == "wgl-p":
        return check_compositional(h, spec, opts, parallel=parallel)
    start = time.perf_counter()
    res = check(build_linked(h), spec, opts)
    # report end-to-end time, as check_compositional does
    res.stats.elapsed = time.perf_counter() - start
    return replace(res, algo=algo)
