"""Offline detection of sync-preserving deadlocks over the abstract lock graph."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .closure import ClosureState, Histories, build_histories, is_sp_deadlock
from .lockgraph import (
    AbstractPattern,
    build_graph,
    compute_abstract_acquires,
    enumerate_cycles,
    filter_abstract_patterns,
)
from .trace import Trace, canonical_pattern
from .vclock import TimestampTable, compute_timestamps, join, leq, zero

log = logging.getLogger(__name__)

SP_KIND = "sync-preserving"


@dataclass
class DeadlockReport:
    kind: str
    events: tuple[int, ...]
    threads: list[str]
    locks: list[str]
    abstract_pattern: int
    locations: list[str | None] | None = None
    witness: list[int] | None = None

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "events": list(self.events),
            "threads": self.threads,
            "locks": self.locks,
            "abstract_pattern": self.abstract_pattern,
        }
        if self.locations is not None:
            d["locations"] = self.locations
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def make_report(trace: Trace, events, pattern_id: int, witness=None, kind: str = SP_KIND) -> DeadlockReport:
    events = canonical_pattern(events)
    evs = [trace.events[e] for e in events]
    locs = [ev.loc for ev in evs]
    return DeadlockReport(
        kind,
        events,
        [trace.thread_names[ev.thread] for ev in evs],
        [trace.lock_names[ev.target] for ev in evs],
        pattern_id,
        locs if any(loc is not None for loc in locs) else None,
        witness,
    )


@dataclass
class PatternResult:
    report: DeadlockReport | None
    closures: int
    pops: int
    visited: list[tuple[int, ...]]
    # index into each F list where the walk stopped
    final_index: list[int]


def check_abstract_pattern(
    trace: Trace,
    ts: TimestampTable,
    ap: AbstractPattern,
    histories: Histories | None = None,
    witness: bool = False,
) -> PatternResult:
    """Walk the instantiations of ``ap`` with one growing closure.

    Candidates whose acquires already fall inside the running closure can
    never be deadlocks once the closure is at least this large, so each
    index only moves forward.
    """
    F = [n.F for n in ap.nodes]
    k = len(F)
    idx = [0] * k
    state = ClosureState(trace, ts, histories)
    T = zero(ts.width)
    visited = []
    while all(idx[j] < len(F[j]) for j in range(k)):
        cand = [F[j][idx[j]] for j in range(k)]
        visited.append(tuple(c.event for c in cand))
        S = zero(ts.width)
        for c in cand:
            S = join(S, c.prev_ts)
        T = state.close(join(T, S))
        if all(not leq(c.acq_ts, T) for c in cand):
            wit = ts.members(T) if witness else None
            rep = make_report(trace, visited[-1], ap.id, wit)
            return PatternResult(rep, state.calls, state.pops, visited, idx)
        for j in range(k):
            while idx[j] < len(F[j]) and leq(F[j][idx[j]].acq_ts, T):
                idx[j] += 1
    return PatternResult(None, state.calls, state.pops, visited, idx)


@dataclass
class Stats:
    events: int = 0
    threads: int = 0
    vars: int = 0
    locks: int = 0
    acquires: int = 0
    nodes: int = 0
    edges: int = 0
    cycles: int = 0
    abstract_patterns: int = 0
    concrete_patterns: int = 0
    closures: list[int] = field(default_factory=list)
    pops: list[int] = field(default_factory=list)
    cap_exceeded: bool = False
    warning: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OfflineResult:
    reports: list[DeadlockReport]
    stats: Stats


# per-process globals for the worker pool
_W: dict = {}


def _init_worker(trace, ts, patterns, all_instances, witness):
    _W.update(trace=trace, ts=ts, patterns=patterns, all_instances=all_instances, witness=witness)
    _W["hist"] = build_histories(trace, ts)


def _run_pattern(i: int):
    return _check(_W["trace"], _W["ts"], _W["patterns"][i], _W["hist"], _W["all_instances"], _W["witness"])


def _check(trace, ts, ap, hist, all_instances, witness):
    if not all_instances:
        res = check_abstract_pattern(trace, ts, ap, hist, witness)
        return [res.report] if res.report else [], res.closures, res.pops
    reports = []
    for inst in ap.instantiations():
        chk = is_sp_deadlock(trace, ts, inst, hist)
        if chk.is_deadlock:
            reports.append(make_report(trace, inst, ap.id, chk.witness if witness else None))
    return reports, ap.n_concrete, 0


def spd_offline(
    trace: Trace,
    max_len: int = 4,
    cycle_cap: int = 10_000,
    all_instances: bool = False,
    parallel: bool | int = False,
    witness: bool = False,
    ts: TimestampTable | None = None,
) -> OfflineResult:
    """Report sync-preserving deadlocks of size at most ``max_len``.

    By default one report per abstract pattern (the first hit).  With
    ``all_instances`` every instantiation is checked with a fresh closure,
    which is quadratic and meant for cross-checking only.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    ts = ts or compute_timestamps(trace)
    nodes = compute_abstract_acquires(trace, ts)
    graph = build_graph(nodes)
    cycles = enumerate_cycles(graph, max_len, cycle_cap)
    patterns = filter_abstract_patterns(graph, cycles)
    stats = Stats(
        events=len(trace),
        threads=trace.n_threads,
        vars=trace.n_vars,
        locks=trace.n_locks,
        acquires=trace.n_acquires,
        nodes=len(nodes),
        edges=graph.n_edges,
        cycles=len(cycles),
        abstract_patterns=len(patterns),
        concrete_patterns=sum(p.n_concrete for p in patterns),
        cap_exceeded=cycles.cap_exceeded,
    )
    if cycles.cap_exceeded:
        stats.warning = f"cycle enumeration stopped at cap {cycle_cap}; results are incomplete"
        log.warning(stats.warning)

    workers = parallel if isinstance(parallel, int) and not isinstance(parallel, bool) else None
    if parallel and len(patterns) > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(trace, ts, patterns, all_instances, witness),
        ) as pool:
            results = list(pool.map(_run_pattern, range(len(patterns))))
    else:
        hist = build_histories(trace, ts)
        results = [_check(trace, ts, ap, hist, all_instances, witness) for ap in patterns]

    reports = []
    for reps, closures, pops in results:
        reports.extend(reps)
        stats.closures.append(closures)
        stats.pops.append(pops)
    reports.sort(key=lambda r: (r.events[0], r.events, r.abstract_pattern))
    return OfflineResult(reports, stats)
