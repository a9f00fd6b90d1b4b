"""Executable sequential specifications.

A specification replays operations against an immutable state. ``apply``
answers whether the recorded result is what the sequential data type would
have returned and, if so, produces the successor state without touching the
input state. States carry an XOR-accumulated 64-bit hash that is updated in
O(1) per modification.

Three data types are provided, all partitionable by key:

``set``      insert(k), remove(k), contains(k) -> bool
``map``      write(k, v) -> true, read(k) -> int or absent (None)
``array:N``  write(i, v) -> true, read(i) -> int; cells start at 0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import hashing
from .history import Operation


class SpecError(ValueError):
    """An operation does not fit the selected specification."""


def _same(actual, recorded) -> bool:
    return type(actual) is type(recorded) and actual == recorded


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

class SpecState:
    """Base class for immutable specification states.

    Subclasses store their contents in ``data`` and the XOR hash in ``hash``.
    """

    __slots__ = ("data", "hash")

    def __init__(self, data, h: int):
        self.data = data
        self.hash = h

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpecState):
            return NotImplemented
        return state_equal(self, other)

    def __hash__(self) -> int:
        return self.hash

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.data!r})"


class SetState(SpecState):
    __slots__ = ()

    @classmethod
    def of(cls, items: Iterable[int] = ()) -> "SetState":
        items = frozenset(items)
        h = 0
        for k in items:
            h ^= hashing.token(k)
        return cls(items, h)

    def __contains__(self, k: int) -> bool:
        return k in self.data

    def add(self, k: int) -> "SetState":
        if k in self.data:
            return self
        return SetState(self.data | {k}, self.hash ^ hashing.token(k))

    def discard(self, k: int) -> "SetState":
        if k not in self.data:
            return self
        return SetState(self.data - {k}, self.hash ^ hashing.token(k))


class MapState(SpecState):
    __slots__ = ()

    @classmethod
    def of(cls, items: Optional[dict] = None) -> "MapState":
        items = dict(items or {})
        h = 0
        for k, v in items.items():
            h ^= hashing.token(k, v)
        return cls(items, h)

    def get(self, k: int) -> Optional[int]:
        return self.data.get(k)

    def set(self, k: int, v: int) -> "MapState":
        old = self.data.get(k)
        if old is not None and old == v:
            return self
        h = self.hash ^ hashing.token(k, v)
        if old is not None:
            h ^= hashing.token(k, old)
        data = dict(self.data)
        data[k] = v
        return MapState(data, h)


class ArrayState(SpecState):
    __slots__ = ()

    @classmethod
    def of(cls, values: Iterable[int]) -> "ArrayState":
        values = tuple(values)
        h = 0
        for i, v in enumerate(values):
            h ^= hashing.token(i, v)
        return cls(values, h)

    def __len__(self) -> int:
        return len(self.data)

    def set(self, i: int, v: int) -> "ArrayState":
        old = self.data[i]
        if old == v:
            return self
        h = self.hash ^ hashing.token(i, old) ^ hashing.token(i, v)
        return ArrayState(self.data[:i] + (v,) + self.data[i + 1:], h)


def state_hash(s: SpecState) -> int:
    return s.hash


def state_equal(a: SpecState, b: SpecState) -> bool:
    if a is b:
        return True
    return type(a) is type(b) and a.hash == b.hash and a.data == b.data


# ---------------------------------------------------------------------------
# Specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spec:
    """A sequential data type: its name, parameters and operation arities."""

    name: str
    operations: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    partitionable: bool = True

    def __hash__(self) -> int:
        return hash((self.name, tuple(sorted(self.parameters.items()))))

    def check_operation(self, op: Operation) -> None:
        arity = self.operations.get(op.name)
        if arity is None:
            raise SpecError(f"{self.name} has no operation {op.name!r}")
        if len(op.args) != arity:
            raise SpecError(f"{self.name}.{op.name} takes {arity} argument(s), got {len(op.args)}")

    def initial_state(self) -> SpecState:
        raise NotImplementedError

    def apply(self, s: SpecState, op: Operation) -> tuple:
        """Return ``(ok, s2)``; raises :class:`SpecError` for ill-formed operations."""
        self.check_operation(op)
        return self.apply_unchecked(s, op)

    def apply_unchecked(self, s: SpecState, op: Operation) -> tuple:
        """``apply`` for an operation already accepted by :meth:`check_operation`."""
        raise NotImplementedError

    def partition_key(self, op: Operation) -> int:
        if not self.partitionable:
            raise SpecError(f"{self.name} is not partitionable")
        self.check_operation(op)
        return op.args[0]

    def __str__(self) -> str:
        return self.name


class SetSpec(Spec):
    def __init__(self):
        super().__init__("set", {"insert": 1, "remove": 1, "contains": 1})

    def initial_state(self) -> SetState:
        return SetState.of()

    def apply_unchecked(self, s: SetState, op: Operation) -> tuple:
        k = op.args[0]
        present = k in s.data
        if op.name == "contains":
            return _same(present, op.result), s
        if op.name == "insert":
            if not _same(not present, op.result):
                return False, s
            return True, s.add(k)
        # remove
        if not _same(present, op.result):
            return False, s
        return True, s.discard(k)


class MapSpec(Spec):
    def __init__(self):
        super().__init__("map", {"write": 2, "read": 1})

    def initial_state(self) -> MapState:
        return MapState.of()

    def apply_unchecked(self, s: MapState, op: Operation) -> tuple:
        if op.name == "read":
            return _same(s.get(op.args[0]), op.result), s
        if op.result is not True:
            return False, s
        k, v = op.args
        return True, s.set(k, v)


class ArraySpec(Spec):
    def __init__(self, length: int):
        if length < 1:
            raise SpecError("array length must be positive")
        super().__init__("array", {"write": 2, "read": 1}, {"length": length})

    @property
    def length(self) -> int:
        return self.parameters["length"]

    def __str__(self) -> str:
        return f"array:{self.length}"

    def check_operation(self, op: Operation) -> None:
        super().check_operation(op)
        i = op.args[0]
        if not 0 <= i < self.length:
            raise SpecError(f"array index {i} out of bounds [0, {self.length})")

    def initial_state(self) -> ArrayState:
        return ArrayState.of([0] * self.length)

    def apply_unchecked(self, s: ArrayState, op: Operation) -> tuple:
        i = op.args[0]
        if op.name == "read":
            return _same(s.data[i], op.result), s
        if op.result is not True:
            return False, s
        return True, s.set(i, op.args[1])


def get_spec(text: str) -> Spec:
    """Look up a specification by CLI name: ``set``, ``map`` or ``array:N``."""
    name, _, param = text.partition(":")
    if name == "set" and not param:
        return SetSpec()
    if name == "map" and not param:
        return MapSpec()
    if name == "array":
        try:
            length = int(param)
        except ValueError:
            raise SpecError(f"array spec needs a length, e.g. array:4 (got {text!r})") from None
        return ArraySpec(length)
    raise SpecError(f"unknown specification {text!r} (expected set, map or array:N)")


# Function-style API over the methods above.

def initial_state(spec: Spec) -> SpecState:
    return spec.initial_state()


def apply(spec: Spec, s: SpecState, op: Operation) -> tuple:
    """Return ``(ok, s2)``: whether ``op.result`` is what ``spec`` returns in state ``s``."""
    return spec.apply(s, op)


def partition_key(spec: Spec, op: Operation) -> int:
    return spec.partition_key(op)


def replay(spec: Spec, ops: Iterable[Operation], state: Optional[SpecState] = None) -> tuple:
    """Fold ``apply`` over ``ops``; return ``(all_ok, final_state)``.

    Stops at the first operation whose recorded result is wrong.
    """
    s = spec.initial_state() if state is None else state
    for op in ops:
        ok, s = spec.apply(s, op)
        if not ok:
            return False, s
    return True, s
