"""``linchk`` command line.

Exit codes: 0 linearizable (or success), 1 not linearizable, 2 usage or
input error, 3 timeout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import BenchConfig, bench, format_table
from .checker import ALGORITHMS, Verdict
from .history import HistoryError, HistoryFormatError, parse_history, serialize_history, validate
from .oracle import BudgetExceeded, OracleBudget, brute_force_check
from .partition import check_history
from .specs import SpecError, get_spec
from .workload import IMPLEMENTATIONS, WorkloadConfig, run_workload

EXIT_OK = 0
EXIT_NOT_LINEARIZABLE = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3

_VERDICT_EXIT = {
    Verdict.LINEARIZABLE: EXIT_OK,
    Verdict.NOT_LINEARIZABLE: EXIT_NOT_LINEARIZABLE,
    Verdict.TIMEOUT: EXIT_TIMEOUT,
}

DEFAULT_LRU_CAPACITY = 1024
FULL_SCALE_OPS_PER_THREAD = 70_000


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0: {v}")
    return v


def _spec(text: str):
    try:
        return get_spec(text)
    except SpecError as exc:
        raise UsageError(str(exc)) from None


def _read_input(path: str):
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    return parse_history(data)


def _write_json(doc: dict, path: str) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_check(args) -> int:
    spec = _spec(args.spec)
    algo = args.algo or ("wgl-p" if spec.partitionable else "wgl")
    if args.cache_capacity is not None and algo != "wgl-lru":
        raise UsageError(f"--cache-capacity only applies to --algo wgl-lru, not {algo}")
    if algo == "wgl-p" and not spec.partitionable:
        raise UsageError(f"--algo wgl-p needs a partitionable spec; {spec} is not")
    if args.parallel is not None and algo != "wgl-p":
        raise UsageError("--parallel only applies to --algo wgl-p")
    capacity = (args.cache_capacity or DEFAULT_LRU_CAPACITY) if algo == "wgl-lru" else None

    h = validate(_read_input(args.input), pending=args.pending)
    res = check_history(
        h, spec, algo, capacity=capacity, timeout=args.timeout,
        witness=args.witness, parallel=args.parallel or 1,
    )

    n_ops = len(h) // 2
    print(f"{res.verdict.value} ({algo}, {spec}, {n_ops} operations, {res.stats.elapsed:.3f}s)")
    if res.partitions:
        note = " (degenerate: single partition)" if res.degenerate else ""
        print(f"partitions: {len(res.partitions)}{note}")
        if res.failing_key is not None:
            print(f"failing partition key: {res.failing_key}")
    if args.witness and res.linearizable:
        if res.witness is not None:
            for op in res.witness:
                print(f"  {op}")
        else:
            for p in res.partitions:
                print(f"  key {p.key}: " + ", ".join(str(op) for op in p.result.witness))
    if args.stats_json:
        _write_json(res.to_dict(), args.stats_json)
    return _VERDICT_EXIT[res.verdict]


def cmd_generate(args) -> int:
    try:
        mix = tuple(float(x) for x in args.mix.split(","))
    except ValueError:
        raise UsageError(f"--mix must be three comma-separated weights, got {args.mix!r}") from None
    ops = FULL_SCALE_OPS_PER_THREAD if args.full_scale else args.ops
    try:
        cfg = WorkloadConfig(
            threads=args.threads, ops_per_thread=ops, key_range=args.keys,
            op_mix=mix, seed=args.seed, impl=args.impl,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = serialize_history(run_workload(cfg))
    if args.output == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(args.output).write_bytes(data)
        print(f"wrote {len(data.splitlines())} events to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = _spec(args.spec)
    algos = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise UsageError(f"unknown algorithm(s): {', '.join(bad)}")
    if not Path(args.dir).is_dir():
        raise UsageError(f"not a directory: {args.dir}")
    report = bench(BenchConfig(
        Path(args.dir), algos, spec, timeout=args.timeout,
        capacity=args.cache_capacity, parallel=args.parallel,
        trace_memory=args.trace_memory,
    ))
    print(format_table(report))
    if args.json:
        _write_json(report, args.json)
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = _spec(args.spec)
    h = validate(_read_input(args.input), pending=args.pending)
    ok = brute_force_check(h, spec, OracleBudget(max_operations=args.max_ops))
    print("linearizable" if ok else "not_linearizable")
    return EXIT_OK if ok else EXIT_NOT_LINEARIZABLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linchk", description="Linearizability checker for concurrent histories.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check a JSONL history")
    c.add_argument("input", nargs="?", default="-", help="history file, or - for stdin")
    c.add_argument("--spec", default="set", help="set, map or array:N (default: set)")
    c.add_argument("--algo", choices=ALGORITHMS, help="default: wgl-p if --spec is partitionable")
    c.add_argument("--cache-capacity", type=_positive_int, help=f"LRU capacity (default {DEFAULT_LRU_CAPACITY})")
    c.add_argument("--timeout", type=_positive_float, help="seconds")
    c.add_argument("--witness", action="store_true", help="print a linearization on success")
    c.add_argument("--stats-json", metavar="PATH", help="write the result as JSON (- for stdout)")
    c.add_argument("--parallel", type=_positive_int, help="worker threads for wgl-p")
    c.add_argument("--pending", choices=("reject", "drop"), default="reject")
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("generate", help="record a history from a concurrent set workload")
    g.add_argument("--threads", type=_positive_int, default=4)
    g.add_argument("--ops", type=_positive_int, default=5000, help="operations per thread")
    g.add_argument("--keys", type=_positive_int, default=24)
    g.add_argument("--impl", choices=sorted(IMPLEMENTATIONS), default="coarse")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mix", default="1,1,1", help="insert,remove,contains weights")
    g.add_argument("--full-scale", action="store_true", help=f"{FULL_SCALE_OPS_PER_THREAD} ops per thread")
    g.add_argument("-o", "--output", default="-")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="compare algorithms over a directory of histories")
    b.add_argument("--dir", required=True)
    b.add_argument("--algos", default="wgl,wgl-lru,wgl-p")
    b.add_argument("--spec", default="set")
    b.add_argument("--timeout", type=_positive_float, default=60.0)
    b.add_argument("--cache-capacity", type=_positive_int, default=DEFAULT_LRU_CAPACITY)
    b.add_argument("--parallel", type=_positive_int, default=1)
    b.add_argument("--trace-memory", action="store_true", help="measure peak traced allocation per check")
    b.add_argument("--json", metavar="PATH")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle", help="brute-force check of a small history")
    o.add_argument("input", nargs="?", default="-")
    o.add_argument("--spec", default="set")
    o.add_argument("--max-ops", type=_positive_int, default=OracleBudget().max_operations)
    o.add_argument("--pending", choices=("reject", "drop"), default="reject")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"linchk: error: {exc}\n")
    except (HistoryFormatError, HistoryError, SpecError, BudgetExceeded, OSError) as exc:
        print(f"linchk: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
