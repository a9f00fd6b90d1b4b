"""Run several checker variants over a directory of histories and summarise."""

from __future__ import annotations

import logging
import statistics
import tracemalloc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .checker import SCHEMA_VERSION, Verdict
from .history import HistoryError, HistoryFormatError, read_history, validate
from .partition import check_history
from .specs import Spec, SetSpec

log = logging.getLogger(__name__)


@dataclass
class BenchConfig:
    directory: Path
    algos: tuple = ("wgl", "wgl-lru", "wgl-p")
    spec: Spec = field(default_factory=SetSpec)
    timeout: Optional[float] = 60.0
    capacity: int = 1024
    parallel: int = 1
    trace_memory: bool = False


def _summary(runs: list) -> dict:
    done = [r for r in runs if r["verdict"] != Verdict.TIMEOUT.value]
    times = [r["time"] for r in done]
    peaks = [r["peak_cache_entries"] for r in done]
    out = {
        "runs": len(runs),
        "median_time": statistics.median(times) if times else None,
        "mean_time": statistics.fmean(times) if times else None,
        "timeout_pct": 100.0 * (len(runs) - len(done)) / len(runs) if runs else 0.0,
        "mean_peak_cache_entries": statistics.fmean(peaks) if peaks else None,
        "max_peak_cache_entries": max(peaks) if peaks else None,
        "verdicts": {
            v.value: sum(1 for r in runs if r["verdict"] == v.value) for v in Verdict
        },
    }
    mem = [r["peak_mem_mib"] for r in done if r.get("peak_mem_mib") is not None]
    if mem:
        out["mean_peak_mem_mib"] = statistics.fmean(mem)
    return out


def bench(cfg: BenchConfig) -> dict:
    """Check every ``*.jsonl`` file under ``cfg.directory`` with each algorithm.

    Unreadable or invalid files are recorded under ``errors`` and skipped.
    """
    files = sorted(Path(cfg.directory).glob("*.jsonl"))
    results = []
    errors = []
    for path in files:
        try:
            h = validate(read_history(path))
        except (OSError, HistoryFormatError, HistoryError, UnicodeDecodeError) as exc:
            log.warning("skipping %s: %s", path, exc)
            errors.append({"file": path.name, "error": str(exc)})
            continue
        row = {"file": path.name, "events": len(h), "algos": {}}
        for algo in cfg.algos:
            if cfg.trace_memory:
                tracemalloc.start()
            res = check_history(
                h, cfg.spec, algo,
                capacity=cfg.capacity if algo == "wgl-lru" else None,
                timeout=cfg.timeout, witness=False, parallel=cfg.parallel,
            )
            entry = {
                "verdict": res.verdict.value,
                "time": res.stats.elapsed,
                "peak_cache_entries": res.stats.peak_cache_entries,
            }
            if cfg.trace_memory:
                entry["peak_mem_mib"] = tracemalloc.get_traced_memory()[1] / 2**20
                tracemalloc.stop()
            row["algos"][algo] = entry
        results.append(row)

    summary = {
        algo: _summary([r["algos"][algo] for r in results]) for algo in cfg.algos
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": str(cfg.spec),
        "algos": list(cfg.algos),
        "files": results,
        "errors": errors,
        "summary": summary,
    }


def format_table(report: dict) -> str:
    def fmt(x, spec=".3f"):
        return "-" if x is None else format(x, spec)

    header = ("algo", "runs", "median s", "mean s", "timeout %", "peak cache", "lin", "non-lin")
    rows = [header]
    for algo, s in report["summary"].items():
        rows.append((
            algo,
            str(s["runs"]),
            fmt(s["median_time"]),
            fmt(s["mean_time"]),
            fmt(s["timeout_pct"], ".1f"),
            fmt(s["max_peak_cache_entries"], "d"),
            str(s["verdicts"]["linearizable"]),
            str(s["verdicts"]["not_linearizable"]),
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [
        "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
        for r in rows
    ]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for e in report["errors"]:
        lines.append(f"error: {e['file']}: {e['error']}")
    return "\n".join(lines)
