"""Replication benchmark: analysis time as a trace is repeated back to back."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .offline import spd_offline
from .online import spd_online
from .trace import parse_trace, validate


def replicate(text: str, m: int) -> str:
    """``m`` copies of a trace, reusing the same thread, lock and variable names."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    return "\n".join(lines * m) + "\n"


@dataclass
class BenchRow:
    mode: str
    factor: int
    events: int
    acquires: int
    seconds: float
    max_pops: int


def run_once(text: str, mode: str) -> tuple[float, int, int, int]:
    t0 = time.perf_counter()
    trace = validate(parse_trace(text))
    if mode == "offline":
        res = spd_offline(trace)
        pops = max(res.stats.pops, default=0)
    else:
        pops = spd_online(trace).pops
    return time.perf_counter() - t0, pops, len(trace), trace.n_acquires


def bench(text: str, factors=(1, 2, 4, 8), modes=("offline", "online"), repeat: int = 5) -> list[BenchRow]:
    """Best-of-``repeat`` wall time per (mode, factor)."""
    rows = []
    for mode in modes:
        for m in factors:
            rep = replicate(text, m)
            best = None
            for _ in range(repeat):
                secs, pops, n, a = run_once(rep, mode)
                best = secs if best is None else min(best, secs)
            rows.append(BenchRow(mode, m, n, a, best, pops))
    return rows
