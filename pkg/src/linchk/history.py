"""Histories of call/return events.

A history is a totally ordered sequence of call and return events. Each
operation is recorded twice: once when it is invoked and once when it
returns, and both records carry the same operation (name, arguments and the
eventual result).

Two representations live here:

* :class:`History`, an immutable event sequence with a JSONL wire format;
* :class:`HistoryList`, a doubly-linked list of :class:`EntryNode` cells that
  the checker mutates in place through :func:`lift` and :func:`unlift`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

CALL = "call"
RET = "ret"

_FIELDS = ("kind", "id", "obj", "op", "args", "result")

Value = Union[bool, int, None]


class HistoryFormatError(ValueError):
    """A history file could not be parsed."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class HistoryError(ValueError):
    """A parsed history is not well formed (unmatched events, pending calls, ...)."""


def _value_key(v: Value) -> tuple:
    # bool is a subclass of int; True must not equal 1 here
    return (type(v).__name__, v)


class Operation:
    """An operation with its arguments and recorded result, e.g. ``insert(1) : true``.

    ``result`` is a bool, an int, or None (the distinguished *absent* value a
    map read returns for a key that was never written).
    """

    __slots__ = ("name", "args", "result", "_hash")

    def __init__(self, name: str, args: Iterable[int] = (), result: Value = None):
        self.name = name
        self.args = tuple(args)
        self.result = result
        self._hash = hash((name, self.args, _value_key(result)))

    def _key(self) -> tuple:
        return (self.name, self.args, _value_key(self.result))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Operation):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Operation({self.name!r}, {self.args!r}, {self.result!r})"

    def __str__(self) -> str:
        args = ", ".join(str(a) for a in self.args)
        return f"{self.name}({args}) : {format_value(self.result)}"


def format_value(v: Value) -> str:
    if v is None:
        return "absent"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class Event:
    kind: str
    id: int
    obj: str
    op: Operation

    @property
    def is_call(self) -> bool:
        return self.kind == CALL


@dataclass(frozen=True)
class History:
    events: tuple = ()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]


def call(id: int, obj: str, name: str, args: Iterable[int], result: Value) -> Event:
    return Event(CALL, id, obj, Operation(name, args, result))


def ret(id: int, obj: str, name: str, args: Iterable[int], result: Value) -> Event:
    return Event(RET, id, obj, Operation(name, args, result))


@dataclass(frozen=True)
class OperationSpan:
    """One complete operation with the positions of its call and return."""

    id: int
    obj: str
    op: Operation
    call_pos: int
    ret_pos: int

    def precedes(self, other: "OperationSpan") -> bool:
        """Happens-before: this operation returned before ``other`` was called."""
        return self.ret_pos < other.call_pos


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------

def _check_value(v, lineno: int) -> Value:
    if v is None or isinstance(v, (bool, int)):
        return v
    raise HistoryFormatError(f"result must be a boolean, integer or null, got {v!r}", lineno)


def _parse_record(line: str, lineno: int) -> Event:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise HistoryFormatError(f"malformed JSON ({exc.msg})", lineno) from None
    if not isinstance(rec, dict):
        raise HistoryFormatError("record must be a JSON object", lineno)
    keys = set(rec)
    if keys != set(_FIELDS):
        extra = sorted(keys - set(_FIELDS))
        missing = sorted(set(_FIELDS) - keys)
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if extra:
            parts.append("unknown " + ", ".join(extra))
        raise HistoryFormatError("bad fields: " + "; ".join(parts), lineno)
    kind = rec["kind"]
    if kind not in (CALL, RET):
        raise HistoryFormatError(f"unknown kind {kind!r}", lineno)
    eid = rec["id"]
    if isinstance(eid, bool) or not isinstance(eid, int) or eid < 0:
        raise HistoryFormatError(f"id must be a natural number, got {eid!r}", lineno)
    if not isinstance(rec["obj"], str) or not isinstance(rec["op"], str):
        raise HistoryFormatError("obj and op must be strings", lineno)
    args = rec["args"]
    if not isinstance(args, list) or any(isinstance(a, bool) or not isinstance(a, int) for a in args):
        raise HistoryFormatError("args must be a list of integers", lineno)
    result = _check_value(rec["result"], lineno)
    return Event(kind, eid, rec["obj"], Operation(rec["op"], args, result))


def parse_history(data: Union[str, bytes, Iterable[str]]) -> History:
    """Parse JSONL text (one event per line) into a :class:`History`.

    Blank lines are ignored. Only record syntax and (kind, id) uniqueness are
    checked; use :func:`validate` for matching and completeness.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines() if isinstance(data, str) else data
    events = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        ev = _parse_record(line, lineno)
        if (ev.kind, ev.id) in seen:
            raise HistoryFormatError(f"duplicate {ev.kind} id {ev.id}", lineno)
        seen.add((ev.kind, ev.id))
        events.append(ev)
    return History(tuple(events))


def event_to_json(ev: Event) -> str:
    rec = {
        "kind": ev.kind,
        "id": ev.id,
        "obj": ev.obj,
        "op": ev.op.name,
        "args": list(ev.op.args),
        "result": ev.op.result,
    }
    return json.dumps(rec, separators=(",", ":"))


def serialize_history(h: History) -> bytes:
    return "".join(event_to_json(ev) + "\n" for ev in h).encode("utf-8")


def read_history(path) -> History:
    with open(path, "rb") as f:
        return parse_history(f.read())


def write_history(h: History, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_history(h))


# ---------------------------------------------------------------------------
# Validation and happens-before
# ---------------------------------------------------------------------------

# The explicit interval-order check is quadratic; histories derived from a
# single event sequence are interval orders by construction, so larger inputs
# skip it.
INTERVAL_CHECK_LIMIT = 512


def validate(h: History, pending: str = "reject") -> History:
    """Check that ``h`` is a complete, well-matched history.

    ``pending`` selects what happens to calls without a return: ``"reject"``
    raises :class:`HistoryError`, ``"drop"`` removes them. Returns ``h``
    itself when nothing had to be dropped.
    """
    if pending not in ("reject", "drop"):
        raise ValueError(f"unknown pending policy {pending!r}")
    open_calls: dict = {}
    seen_calls = set()
    seen_rets = set()
    for pos, ev in enumerate(h):
        if ev.kind == CALL:
            if ev.id in seen_calls:
                raise HistoryError(f"duplicate call id {ev.id} at position {pos}")
            seen_calls.add(ev.id)
            open_calls[ev.id] = ev
        else:
            if ev.id in seen_rets:
                raise HistoryError(f"duplicate return id {ev.id} at position {pos}")
            seen_rets.add(ev.id)
            c = open_calls.pop(ev.id, None)
            if c is None:
                raise HistoryError(f"return {ev.id} at position {pos} has no earlier matching call")
            if c.obj != ev.obj or c.op != ev.op:
                raise HistoryError(
                    f"return {ev.id} does not match its call: "
                    f"{c.obj}.{c.op} vs {ev.obj}.{ev.op}"
                )
    if open_calls:
        if pending == "reject":
            ids = ", ".join(str(i) for i in sorted(open_calls))
            raise HistoryError(f"history is incomplete; pending calls: {ids}")
        h = History(tuple(ev for ev in h if not (ev.kind == CALL and ev.id in open_calls)))
    spans = operations(h)
    if len(spans) <= INTERVAL_CHECK_LIMIT:
        ids = [s.id for s in spans]
        if not is_interval_order(ids, happens_before(h, spans)):
            raise HistoryError("happens-before is not an interval order")
    return h


def operations(h: History) -> list:
    """Return the complete operations of ``h`` as :class:`OperationSpan`, in call order."""
    calls = {}
    spans = []
    for pos, ev in enumerate(h):
        if ev.kind == CALL:
            calls[ev.id] = (pos, ev)
        else:
            cpos, c = calls[ev.id]
            spans.append(OperationSpan(ev.id, c.obj, c.op, cpos, pos))
    spans.sort(key=lambda s: s.call_pos)
    return spans


def happens_before(h: History, spans: Optional[list] = None) -> frozenset:
    """The happens-before relation as a set of ``(call id, call id)`` pairs."""
    if spans is None:
        spans = operations(h)
    return frozenset(
        (a.id, b.id) for a in spans for b in spans if a.ret_pos < b.call_pos
    )


def concurrent(h: History, a: int, b: int) -> bool:
    hb = happens_before(h)
    return a != b and (a, b) not in hb and (b, a) not in hb


def is_interval_order(elements: Iterable, pairs) -> bool:
    """True iff the strict partial order ``pairs`` on ``elements`` has no 2+2 suborder.

    Uses the characterisation that an order is an interval order exactly when
    the strict predecessor sets of its elements are totally ordered by
    inclusion.
    """
    preds = {e: set() for e in elements}
    for a, b in pairs:
        preds[b].add(a)
    chain = sorted(preds.values(), key=len)
    return all(x <= y for x, y in zip(chain, chain[1:]))


# ---------------------------------------------------------------------------
# Linked representation
# ---------------------------------------------------------------------------

class EntryNode:
    """A cell of the doubly-linked history. ``match`` is set only on call entries."""

    __slots__ = ("prev", "next", "match", "entry_id", "op", "obj", "event_id")

    def __init__(self, entry_id: int, op: Operation, obj: str, event_id: int = -1):
        self.prev = self.next = self.match = None
        self.entry_id = entry_id
        self.op = op
        self.obj = obj
        self.event_id = event_id

    @property
    def is_call(self) -> bool:
        return self.match is not None

    def __repr__(self) -> str:
        kind = CALL if self.match is not None else RET
        return f"<{kind}#{self.entry_id} {self.op}>"


class HistoryList:
    """Sentinel-headed doubly-linked list of entries with ``n_calls`` call entries."""

    def __init__(self, head: Optional[EntryNode] = None, n_calls: int = 0):
        self.head = head if head is not None else EntryNode(-1, Operation("<head>"), "")
        self.n_calls = n_calls

    def __iter__(self) -> Iterator[EntryNode]:
        node = self.head.next
        while node is not None:
            yield node
            node = node.next

    def __len__(self) -> int:
        return sum(1 for _ in self)

    def calls(self) -> list:
        return [e for e in self if e.match is not None]


def build_linked(h: History) -> HistoryList:
    """Build the linked list for a complete, validated history.

    Entry ids are assigned densely in call order, and each return shares the
    id of its call.
    """
    hl = HistoryList()
    prev = hl.head
    calls = {}
    n = 0
    for ev in h.events:
        if ev.kind == CALL:
            node = EntryNode(n, ev.op, ev.obj, ev.id)
            calls[ev.id] = node
            n += 1
        else:
            c = calls.pop(ev.id)
            node = EntryNode(c.entry_id, ev.op, ev.obj, ev.id)
            c.match = node
        prev.next = node
        node.prev = prev
        prev = node
    hl.n_calls = n
    return hl


def lift(entry: EntryNode) -> None:
    """Unlink a call entry and its matching return in O(1).

    The removed cells keep pointers into the list, which is what lets
    :func:`unlift` put them back. When the return directly follows the call,
    the return's ``prev`` is rewired to the call's predecessor; unlift
    restores it.
    """
    entry.prev.next = entry.next
    entry.next.prev = entry.prev
    match = entry.match
    match.prev.next = match.next
    if match.next is not None:
        match.next.prev = match.prev


def unlift(entry: EntryNode) -> None:
    """Relink an entry removed by the most recent outstanding :func:`lift`."""
    match = entry.match
    match.prev.next = match
    if match.next is not None:
        match.next.prev = match
    entry.prev.next = entry
    entry.next.prev = entry
