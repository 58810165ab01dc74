"""Vector clocks and thread-read-from timestamps.

Clocks are plain tuples of non-negative ints, one component per thread.
"""

from __future__ import annotations

from collections.abc import Iterable
from operator import le

from .trace import READ, Trace

VectorClock = tuple[int, ...]


class WidthMismatch(ValueError):
    pass


def zero(width: int) -> VectorClock:
    return (0,) * width


def leq(a: VectorClock, b: VectorClock) -> bool:
    if len(a) != len(b):
        raise WidthMismatch(f"widths {len(a)} and {len(b)} differ")
    return all(map(le, a, b))


def join(a: VectorClock, b: VectorClock) -> VectorClock:
    if len(a) != len(b):
        raise WidthMismatch(f"widths {len(a)} and {len(b)} differ")
    return tuple(map(max, a, b))


def join_all(clocks: Iterable[VectorClock], width: int) -> VectorClock:
    out = zero(width)
    for c in clocks:
        out = join(out, c)
    return out


def increment(c: VectorClock, t: int) -> VectorClock:
    return c[:t] + (c[t] + 1,) + c[t + 1 :]


def pad(c: VectorClock, width: int) -> VectorClock:
    return c + (0,) * (width - len(c)) if len(c) < width else c


class TimestampTable:
    """Per-event timestamps TS^e of an indexed trace."""

    def __init__(self, clocks: list[VectorClock], width: int, top: VectorClock):
        self.clocks = clocks
        self.width = width
        # dominates every event of the trace
        self.top = top

    def __getitem__(self, e: int) -> VectorClock:
        return self.clocks[e]

    def __len__(self) -> int:
        return len(self.clocks)

    def of_set(self, events: Iterable[int]) -> VectorClock:
        return join_all((self.clocks[e] for e in events), self.width)

    def members(self, clock: VectorClock) -> list[int]:
        """Event ids whose timestamp is below ``clock``, in trace order."""
        return [e for e, c in enumerate(self.clocks) if leq(c, clock)]


def compute_timestamps(trace: Trace) -> TimestampTable:
    """One left-to-right pass computing TS^e for every event.

    TS^e(t) counts the events of thread t that precede e in the order
    generated by thread order, reads-from and fork/join edges, so the local
    component advances at every event.
    """
    trace._require_index()
    width = trace.n_threads
    cur = [zero(width)] * width
    clocks: list[VectorClock] = []
    rf = trace.rf
    preds = trace.order_preds
    for ev in trace.events:
        t = ev.thread
        c = cur[t]
        if ev.op == READ and ev.id in rf:
            c = join(c, clocks[rf[ev.id]])
        for p in preds.get(ev.id, ()):
            c = join(c, clocks[p])
        c = increment(c, t)
        cur[t] = c
        clocks.append(c)
    top = tuple(len(evs) for evs in trace.per_thread)
    return TimestampTable(clocks, width, top)
