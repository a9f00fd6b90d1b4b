"""Brute-force reference decision procedure for small histories.

Works on :class:`~linchk.history.OperationSpan` intervals directly and shares
nothing with the linked-list search except the specification's ``apply``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .history import History, operations
from .specs import Spec


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_operations: int = 12
    max_enumerations: int = 5_000_000


def _spans(h: History, budget: OracleBudget) -> list:
    spans = operations(h)
    if len(spans) > budget.max_operations:
        raise BudgetExceeded(
            f"{len(spans)} operations exceed the oracle budget of {budget.max_operations}"
        )
    return spans


def _predecessors(spans: list) -> list:
    # bitmask of the operations that must come before each operation
    return [
        sum(1 << j for j, a in enumerate(spans) if a.ret_pos < b.call_pos)
        for b in spans
    ]


def enumerate_linearizations(h: History, budget: OracleBudget = OracleBudget()) -> Iterator[list]:
    """Yield every total order of ``h``'s operations that extends happens-before.

    Each order is a list of :class:`OperationSpan`.
    """
    spans = _spans(h, budget)
    preds = _predecessors(spans)
    n = len(spans)
    full = (1 << n) - 1
    count = 0
    order: list = []

    def rec(used: int):
        nonlocal count
        if used == full:
            count += 1
            if count > budget.max_enumerations:
                raise BudgetExceeded(f"more than {budget.max_enumerations} linearizations")
            yield list(order)
            return
        for i in range(n):
            if not used >> i & 1 and preds[i] & used == preds[i]:
                order.append(spans[i])
                yield from rec(used | 1 << i)
                order.pop()

    yield from rec(0)


def brute_force_check(h: History, spec: Spec, budget: OracleBudget = OracleBudget()) -> bool:
    """True iff some order extending happens-before replays correctly through ``spec``.

    Orders are explored depth-first and a prefix is abandoned as soon as one
    of its operations replays with the wrong result; no other pruning.
    """
    spans = _spans(h, budget)
    for s in spans:
        spec.check_operation(s.op)
    preds = _predecessors(spans)
    n = len(spans)
    full = (1 << n) - 1
    steps = 0

    def rec(used: int, state) -> bool:
        nonlocal steps
        if used == full:
            return True
        steps += 1
        if steps > budget.max_enumerations:
            raise BudgetExceeded(f"more than {budget.max_enumerations} search steps")
        for i in range(n):
            if not used >> i & 1 and preds[i] & used == preds[i]:
                ok, nxt = spec.apply(state, spans[i].op)
                if ok and rec(used | 1 << i, nxt):
                    return True
        return False

    return rec(0, spec.initial_state())
