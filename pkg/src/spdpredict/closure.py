"""Sync-preserving closure computed on timestamps, and the closure based deadlock test."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple

from .trace import ACQ, NotAPattern, Trace, is_deadlock_pattern
from .vclock import TimestampTable, VectorClock, join, leq, zero


@dataclass(frozen=True, slots=True)
class CSEntry:
    event: int
    acq: VectorClock
    # None when the critical section is never closed
    rel: VectorClock | None
    g: int


# lock -> one tuple of entries per thread that ever acquires it, in thread order
Histories = dict[int, tuple[tuple[CSEntry, ...], ...]]


def build_histories(trace: Trace, ts: TimestampTable) -> Histories:
    per: dict[int, dict[int, list[CSEntry]]] = {}
    for ev in trace.events:
        if ev.op != ACQ:
            continue
        r = trace.release_of.get(ev.id)
        entry = CSEntry(ev.id, ts[ev.id], ts[r] if r is not None else None, trace.lock_index[ev.id])
        per.setdefault(ev.target, {}).setdefault(ev.thread, []).append(entry)
    return {lock: tuple(tuple(q) for q in by_thread.values()) for lock, by_thread in per.items()}


class ClosureState:
    """Running closure timestamp plus consumable critical-section queues.

    Successive :meth:`close` calls may only grow the closure, which is what
    lets queue pops be permanent.
    """

    def __init__(self, trace: Trace, ts: TimestampTable, histories: Histories | None = None):
        self.ts = ts
        self.hist = histories if histories is not None else build_histories(trace, ts)
        self.heads = {lock: [0] * len(qs) for lock, qs in self.hist.items()}
        self.clock = zero(ts.width)
        self.infeasible = False
        self.pops = 0
        self.calls = 0

    def close(self, t0: VectorClock) -> VectorClock:
        self.calls += 1
        if self.infeasible:
            return self.clock
        T = join(self.clock, t0)
        changed = True
        while changed:
            changed = False
            for lock, queues in self.hist.items():
                heads = self.heads[lock]
                selected = []
                for qi, q in enumerate(queues):
                    h = heads[qi]
                    if h >= len(q) or not leq(q[h].acq, T):
                        continue
                    # keep the last qualifying entry at the head: it may need
                    # its release later, once a newer acquire joins the set
                    while h + 1 < len(q) and leq(q[h + 1].acq, T):
                        h += 1
                        self.pops += 1
                    heads[qi] = h
                    selected.append(q[h])
                if len(selected) < 2:
                    continue
                latest = max(selected, key=lambda en: en.g)
                for en in selected:
                    if en is latest:
                        continue
                    if en.rel is None:
                        self.infeasible = True
                        self.clock = self.ts.top
                        return self.clock
                    if not leq(en.rel, T):
                        T = join(T, en.rel)
                        changed = True
        self.clock = T
        return T


def comp_sp_closure(state: ClosureState, t0: VectorClock) -> VectorClock:
    """Timestamp of the sync-preserving closure of ``{e : TS^e below state.T join t0}``."""
    return state.close(t0)


def prev_set(trace: Trace, events: Iterable[int]) -> set[int]:
    out = set()
    for e in events:
        p = trace.prev(e)
        if p is not None:
            out.add(p)
    return out


class SPCheck(NamedTuple):
    is_deadlock: bool
    witness: list[int] | None
    closure: VectorClock


def is_sp_deadlock(
    trace: Trace, ts: TimestampTable, pattern: Iterable[int], histories: Histories | None = None
) -> SPCheck:
    """Closure test for one concrete pattern, with a fresh closure state.

    The witness, when the pattern is a deadlock, is the trace restricted to
    the closure of the pattern's predecessors.
    """
    pattern = tuple(pattern)
    if not is_deadlock_pattern(trace, pattern):
        raise NotAPattern(f"{pattern} is not a deadlock pattern")
    state = ClosureState(trace, ts, histories)
    T = state.close(ts.of_set(prev_set(trace, pattern)))
    ok = not state.infeasible and all(not leq(ts[e], T) for e in pattern)
    return SPCheck(ok, ts.members(T) if ok else None, T)
