import random

import pytest

from linchk import hashing
from linchk.checker import (
    Bitset,
    CheckerOptions,
    ConfigCache,
    Configuration,
    Verdict,
    bit_tokens,
    check,
)
from linchk.history import History, Operation, build_linked, call, parse_history, ret
from linchk.partition import check_history
from linchk.specs import SetState, SpecError, get_spec, replay
from linchk.workload import make_violation

from histgen import H1_TEXT, check_witness, random_history, spec_for

SET = get_spec("set")


def sequential(*ops) -> History:
    events = []
    for i, o in enumerate(ops, 1):
        events += [call(i, "set", o.name, o.args, o.result), ret(i, "set", o.name, o.args, o.result)]
    return History(tuple(events))


H3 = sequential(Operation("insert", [1], True), Operation("remove", [1], False), Operation("contains", [1], True))


# -- bitset ------------------------------------------------------------------

def test_toggle_is_an_involution():
    b = Bitset(10)
    b.toggle(3)
    h = b.hash
    b.toggle(7)
    b.toggle(7)
    assert b.bits == 1 << 3 and b.hash == h
    b.toggle(3)
    assert b.bits == 0 and b.hash == 0


def test_toggle_order_does_not_matter():
    a, b = Bitset(5), Bitset(5)
    a.toggle(1)
    a.toggle(3)
    b.toggle(3)
    b.toggle(1)
    assert a.hash == b.hash and a.bits == b.bits


def test_toggle_out_of_range():
    with pytest.raises(IndexError):
        Bitset(4).toggle(4)


def test_incremental_hash_matches_recompute():
    rng = random.Random(0)
    for _ in range(1000):
        n = rng.randint(1, 200)
        b = Bitset(n)
        for _ in range(rng.randint(0, 50)):
            b.toggle(rng.randrange(n))
            assert b.hash == b.recompute_hash()
        assert b.popcount() == len(list(b))


# -- cache -------------------------------------------------------------------

def cfg(bits: int, items=()) -> Configuration:
    tokens = bit_tokens(16)
    h = 0
    for i in range(16):
        if bits >> i & 1:
            h ^= tokens[i]
    return Configuration(bits, h, SetState.of(items))


def test_cache_set_semantics():
    c = ConfigCache()
    assert c.insert(cfg(0b101, [1]))
    assert not c.insert(cfg(0b101, [1]))
    assert c.insert(cfg(0b101, [2]))
    assert c.insert(cfg(0b100, [1]))
    assert len(c) == 3 and c.hits == 1


def test_cache_forced_collision_keeps_both():
    with hashing.override_tokens(lambda *parts: 7):
        a, b = cfg(0b1, [1]), cfg(0b1, [2])
        assert hash(a) == hash(b) and a != b
        c = ConfigCache()
        assert c.insert(a)
        assert c.insert(b)
        assert len(c) == 2


def test_lru_capacity_one():
    c = ConfigCache(1)
    a, b = cfg(1), cfg(2)
    assert c.insert(a)
    assert c.insert(b)
    assert c.insert(a)
    assert c.evictions == 2 and c.peak == 1


def test_lru_hit_refreshes_recency():
    c = ConfigCache(2)
    a, b, d = cfg(1), cfg(2), cfg(4)
    c.insert(a)
    c.insert(b)
    assert not c.insert(a)  # touch a, so b is now the oldest
    c.insert(d)
    assert a in c and b not in c


def test_options_validation():
    with pytest.raises(ValueError):
        CheckerOptions(cache="lru")
    with pytest.raises(ValueError):
        CheckerOptions(cache="unbounded", capacity=4)
    with pytest.raises(ValueError):
        CheckerOptions(cache="bogus")
    with pytest.raises(ValueError):
        CheckerOptions.for_algo("dfs")
    with pytest.raises(ValueError):
        ConfigCache(0)


# -- search ------------------------------------------------------------------

ALL = [("wg", None), ("wgl", None), ("wgl-lru", 1), ("wgl-lru", 16), ("wgl-p", None)]


@pytest.mark.parametrize("algo, capacity", ALL)
def test_h1_linearizable_with_valid_witness(algo, capacity):
    h = parse_history(H1_TEXT)
    res = check_history(h, SET, algo, capacity=capacity)
    assert res.verdict is Verdict.LINEARIZABLE
    check_witness(h, SET, res.witness_ids)
    assert replay(SET, res.witness)[0]


def test_h1_witness_is_h2():
    res = check(build_linked(parse_history(H1_TEXT)), SET)
    assert [str(o) for o in res.witness] == ["remove(1) : false", "insert(1) : true", "contains(1) : true"]


@pytest.mark.parametrize("algo, capacity", ALL)
def test_h3_not_linearizable(algo, capacity):
    res = check_history(H3, SET, algo, capacity=capacity)
    assert res.verdict is Verdict.NOT_LINEARIZABLE
    assert res.witness is None


def test_empty_history():
    res = check(build_linked(History(())), SET)
    assert res.verdict is Verdict.LINEARIZABLE and res.witness == ()


def test_single_operation_witness():
    o = Operation("insert", [5], True)
    res = check(build_linked(sequential(o)), SET)
    assert res.witness == (o,)


def test_concurrent_double_insert():
    res = check(build_linked(make_violation("double_insert")), SET)
    assert res.verdict is Verdict.NOT_LINEARIZABLE


def test_operation_mismatch_is_an_error():
    h = sequential(Operation("push", [1], True))
    with pytest.raises(SpecError):
        check(build_linked(h), SET)


def test_witness_can_be_disabled():
    res = check(build_linked(parse_history(H1_TEXT)), SET, CheckerOptions(witness=False))
    assert res.linearizable and res.witness is None


def test_max_iterations_gives_timeout():
    h = parse_history(H1_TEXT)
    res = check(build_linked(h), SET, CheckerOptions(max_iterations=1))
    assert res.verdict is Verdict.TIMEOUT and res.witness is None


def test_timeout_gives_timeout_verdict():
    # many concurrent operations on one key with one bad result: WG explores a lot
    events = [call(i, "set", "contains", [0], False) for i in range(1, 15)]
    events.append(call(15, "set", "contains", [0], True))
    events += [ret(i, "set", "contains", [0], False) for i in range(1, 15)]
    events.append(ret(15, "set", "contains", [0], True))
    res = check(build_linked(History(tuple(events))), SET, CheckerOptions(cache="none", timeout=0.05))
    assert res.verdict is Verdict.TIMEOUT


def test_debug_instrumentation_runs():
    rng = random.Random(4)
    for _ in range(200):
        h = random_history(rng, "set", threads=3, max_ops=10)
        hl = build_linked(h)
        before = [(id(n.prev), id(n.next)) for n in hl]
        res = check(hl, SET, CheckerOptions(debug=True))
        if not res.linearizable:
            assert [(id(n.prev), id(n.next)) for n in hl] == before
        else:
            assert hl.head.next is None


def test_stack_bound_and_stats():
    rng = random.Random(5)
    for _ in range(100):
        h = random_history(rng, "set", threads=4, max_ops=12)
        hl = build_linked(h)
        res = check(hl, SET)
        assert res.stats.max_stack_height <= hl.n_calls
        assert res.stats.peak_cache_entries <= res.stats.cache_insertions


@pytest.mark.parametrize("spec_name", ["set", "map", "array"])
def test_cache_modes_agree_and_witnesses_validate(spec_name):
    rng = random.Random(spec_name)
    spec = spec_for(spec_name)
    for _ in range(300):
        h = random_history(rng, spec_name, threads=rng.randint(2, 4), max_ops=12)
        verdicts = set()
        for algo, capacity in ALL:
            res = check_history(h, spec, algo, capacity=capacity)
            verdicts.add(res.verdict)
            if res.linearizable and res.witness_ids is not None:
                check_witness(h, spec, res.witness_ids)
            if algo == "wgl-lru":
                assert res.stats.peak_cache_entries <= capacity
        assert len(verdicts) == 1


def test_result_to_dict():
    res = check_history(parse_history(H1_TEXT), SET, "wgl")
    d = res.to_dict()
    assert d["schema_version"] == 1
    assert d["verdict"] == "linearizable" and d["algo"] == "wgl"
    assert d["witness_ids"] == [2, 1, 3]
