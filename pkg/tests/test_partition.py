import random
from collections import Counter

import pytest

from linchk.checker import CheckerOptions, Verdict, check
from linchk.history import CALL, History, build_linked, call, happens_before, parse_history, ret
from linchk.oracle import OracleBudget, brute_force_check
from linchk.partition import (
    check_compositional,
    check_history,
    count_partitions,
    partition,
    partition_history,
)
from linchk.specs import Spec, SpecError, get_spec
from linchk.workload import WorkloadConfig, run_workload

from histgen import H1_TEXT, check_witness, random_history, restrict

SET = get_spec("set")


def two_key_history() -> History:
    return History((
        call(1, "set", "insert", [0], True),
        call(2, "set", "contains", [0], True),
        call(3, "set", "remove", [1], False),
        ret(1, "set", "insert", [0], True),
        ret(2, "set", "contains", [0], True),
        ret(3, "set", "remove", [1], False),
    ))


def event_ids(hl) -> list:
    return [(n.match is not None, n.event_id) for n in hl]


def test_count_partitions():
    assert count_partitions(two_key_history(), SET) == (2, {0: 0, 1: 1})
    assert count_partitions(History(()), SET) == (0, {})


def test_count_partitions_workload_keys():
    h = run_workload(WorkloadConfig(threads=2, ops_per_thread=500, key_range=24, seed=1))
    n, key_map = count_partitions(h, SET)
    assert n == 24 and sorted(key_map.values()) == list(range(24))


def test_two_key_split():
    ps = partition_history(two_key_history(), SET)
    assert ps.keys == [0, 1]
    assert event_ids(ps.subs[0]) == [(True, 1), (True, 2), (False, 1), (False, 2)]
    assert event_ids(ps.subs[1]) == [(True, 3), (False, 3)]
    assert [n.entry_id for n in ps.subs[0].calls()] == [0, 1]
    assert [n.entry_id for n in ps.subs[1].calls()] == [0]


def test_partition_n1_is_identity():
    h = two_key_history()
    hl = build_linked(h)
    before = event_ids(hl)
    (sub,) = partition(hl.head.next, 1, lambda e: 0)
    assert event_ids(sub) == before and sub.n_calls == 3


def test_partition_rejects_zero():
    with pytest.raises(ValueError):
        partition(None, 0, lambda e: 0)


def test_non_partitionable_spec():
    spec = Spec("whole", {"insert": 1, "contains": 1}, partitionable=False)
    with pytest.raises(SpecError):
        count_partitions(two_key_history(), spec)
    with pytest.raises(SpecError):
        spec.partition_key(two_key_history()[0].op)


def test_partition_structure_properties():
    rng = random.Random(0)
    for _ in range(1000):
        h = random_history(rng, rng.choice(["set", "map"]), threads=rng.randint(1, 4), max_ops=14)
        spec = get_spec(h[0].obj) if len(h) else SET
        ps = partition_history(h, spec)
        original = [(ev.kind == CALL, ev.id) for ev in h]
        pieces = [event_ids(sub) for sub in ps.subs]
        # disjoint union
        assert Counter(e for p in pieces for e in p) == Counter(original)
        for key, sub, p in zip(ps.keys, ps.subs, pieces):
            # order preserved: each piece is a subsequence of the original
            it = iter(original)
            assert all(e in it for e in p)
            # calls and returns land together, all with this key
            for node in sub:
                assert spec.partition_key(node.op) == key
                if node.match is not None:
                    assert (False, node.event_id) in p
            assert sorted(n.entry_id for n in sub.calls()) == list(range(sub.n_calls))


def test_happens_before_is_restricted():
    rng = random.Random(1)
    for _ in range(300):
        h = random_history(rng, "set", threads=4, max_ops=14)
        hb = happens_before(h)
        ps = partition_history(h, SET)
        for sub in ps.subs:
            ids = {n.event_id for n in sub}
            sub_h = restrict(h, ids)
            assert happens_before(sub_h) == {(a, b) for a, b in hb if a in ids and b in ids}


def test_h1_single_partition_is_degenerate():
    h = parse_history(H1_TEXT)
    res = check_compositional(h, SET)
    assert res.linearizable and res.degenerate and len(res.partitions) == 1
    check_witness(h, SET, res.witness_ids)


def test_two_keys_two_linearizable_partitions():
    res = check_compositional(two_key_history(), SET)
    assert res.linearizable and not res.degenerate
    assert [p.result.verdict for p in res.partitions] == [Verdict.LINEARIZABLE] * 2
    assert res.witness is None  # reported per partition
    assert all(p.result.witness is not None for p in res.partitions)


def test_failing_key_reported():
    h = History((
        call(1, "set", "insert", [0], True),
        ret(1, "set", "insert", [0], True),
        call(2, "set", "insert", [1], True),
        call(3, "set", "insert", [1], True),
        call(4, "set", "contains", [0], True),
        ret(2, "set", "insert", [1], True),
        ret(3, "set", "insert", [1], True),
        ret(4, "set", "contains", [0], True),
    ))
    key1 = restrict(h, {2, 3})
    assert not brute_force_check(key1, SET)
    assert brute_force_check(restrict(h, {1, 4}), SET)
    res = check_compositional(h, SET)
    assert res.verdict is Verdict.NOT_LINEARIZABLE and res.failing_key == 1


def test_empty_history():
    res = check_compositional(History(()), SET)
    assert res.linearizable and res.partitions == () and res.degenerate


def test_equivalence_with_oracle():
    rng = random.Random(2)
    budget = OracleBudget(max_operations=16)
    for _ in range(10_000):
        h = random_history(rng, "set", threads=rng.randint(2, 4), max_ops=16)
        expected = brute_force_check(h, SET, budget)
        assert check_compositional(h, SET).linearizable == expected
        assert check(build_linked(h), SET).linearizable == expected


def test_parallel_is_deterministic():
    rng = random.Random(3)
    for _ in range(100):
        h = random_history(rng, "set", threads=4, max_ops=16)
        a = check_compositional(h, SET, parallel=1)
        b = check_compositional(h, SET, parallel=4)
        assert a.verdict == b.verdict and a.failing_key == b.failing_key
        assert [p.result.verdict for p in a.partitions] == [p.result.verdict for p in b.partitions]


def test_workload_history_linearizable():
    h = run_workload(WorkloadConfig(threads=4, ops_per_thread=1000, seed=3))
    res = check_history(h, SET, "wgl-p")
    assert res.linearizable and len(res.partitions) == 24
    for p in res.partitions:
        assert len(p.result.witness) == p.n_operations


def test_timeout_budget_is_shared():
    h = run_workload(WorkloadConfig(threads=4, ops_per_thread=1000, seed=4))
    res = check_compositional(h, SET, CheckerOptions(timeout=1e-9))
    assert res.verdict is Verdict.TIMEOUT
