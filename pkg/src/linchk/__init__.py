"""Linearizability checking for concurrent histories.

Typical use::

    from linchk import read_history, validate, get_spec, check_history

    h = validate(read_history("run.jsonl"))
    result = check_history(h, get_spec("set"), algo="wgl-p")
    print(result.verdict)
"""

__version__ = "0.1.0"

from .checker import CheckerOptions, CheckResult, Verdict, check  # noqa: E402
from .history import (  # noqa: E402
    History,
    Operation,
    build_linked,
    parse_history,
    read_history,
    serialize_history,
    validate,
    write_history,
)
from .oracle import brute_force_check  # noqa: E402
from .partition import check_compositional, check_history  # noqa: E402
from .specs import get_spec  # noqa: E402

__all__ = [
    "CheckResult",
    "CheckerOptions",
    "History",
    "Operation",
    "Verdict",
    "brute_force_check",
    "build_linked",
    "check",
    "check_compositional",
    "check_history",
    "get_spec",
    "parse_history",
    "read_history",
    "serialize_history",
    "validate",
    "write_history",
]
