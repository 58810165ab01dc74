"""Single-pass streaming detection of size-2 sync-preserving deadlocks."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass

from .offline import SP_KIND, DeadlockReport
from .trace import ACQ, FORK, JOIN, READ, REL, REQ, WRITE, Event, Trace, TraceError, TraceParser
from .vclock import VectorClock


class StreamError(TraceError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(message)
        self.line = line


# Clocks grow as threads appear, so these treat missing components as 0.
def _leq(a: VectorClock, b: VectorClock) -> bool:
    nb = len(b)
    for i, x in enumerate(a):
        if x > (b[i] if i < nb else 0):
            return False
    return True


def _join(a: VectorClock, b: VectorClock) -> VectorClock:
    if len(a) < len(b):
        a, b = b, a
    return tuple(max(x, b[i]) for i, x in enumerate(a[: len(b)])) + a[len(b) :]


def _inc(c: VectorClock, t: int) -> VectorClock:
    if len(c) <= t:
        c = c + (0,) * (t + 1 - len(c))
    return c[:t] + (c[t] + 1,) + c[t + 1 :]


@dataclass(slots=True)
class _CS:
    g: int
    acq: VectorClock
    rel: VectorClock | None


@dataclass(frozen=True, slots=True)
class _Acq:
    prev: VectorClock
    acq: VectorClock
    event: int
    loc: str | None


class OnlineEngine:
    """Streaming detector; feed events in trace order.

    Per-tuple critical-section histories are cursors into shared append-only
    logs, and the per-observer acquire histories likewise, so nothing is
    copied per tuple.
    """

    def __init__(self, threads_hint: int | None = None, sink: Callable[[DeadlockReport], None] | None = None):
        self.parser = TraceParser()
        self.sink = sink
        self.reports: list[DeadlockReport] = []
        self.pops = 0
        self.n = 0  # events kept after normalization
        self._zero: VectorClock = (0,) * (threads_hint or 0)
        self.C: list[VectorClock] = []
        self.LW: dict[int, VectorClock] = {}
        self.g: dict[int, int] = {}
        self.cs: dict[tuple[int, int], list[_CS]] = {}
        self.cs_threads: dict[int, list[int]] = {}
        self.views: dict[tuple, dict[tuple[int, int], int]] = {}
        self.I: dict[tuple, VectorClock] = {}
        self.acq: dict[tuple[int, int, int], list[_Acq]] = {}
        self.acq_cursor: dict[tuple[int, int, int, int], int] = {}
        self.acq_threads: dict[tuple[int, int], set[int]] = {}
        self.pattern_ids: dict[frozenset, int] = {}
        # incremental well-formedness
        self._depth: dict[tuple[int, int], int] = {}
        self._owner: dict[int, int] = {}
        self._held: list[set[int]] = []
        self._started: set[int] = set()
        self._forked: set[int] = set()
        self._joined: set[int] = set()

    @classmethod
    def for_trace(cls, trace: Trace, sink=None) -> OnlineEngine:
        eng = cls(trace.n_threads, sink)
        eng.parser.thread_names = trace.thread_names
        eng.parser.lock_names = trace.lock_names
        eng.parser.var_names = trace.var_names
        return eng

    def _thread(self, t: int) -> None:
        while len(self.C) <= t:
            self.C.append(self._zero)
            self._held.append(set())

    def feed_line(self, text: str, lineno: int = 0) -> list[DeadlockReport]:
        ev = self.parser.parse_line(text, lineno)
        return self.feed(ev) if ev is not None else []

    def feed_all(self, events: Iterable[Event]) -> list[DeadlockReport]:
        out = []
        for ev in events:
            out.extend(self.feed(ev))
        return out

    def feed(self, ev: Event) -> list[DeadlockReport]:
        t, op, x = ev.thread, ev.op, ev.target
        self._thread(t)
        if op in (FORK, JOIN):
            self._thread(x)
        if t in self._joined:
            raise StreamError(f"line {ev.line}: event in thread already joined", ev.line)
        # reentrant inner pairs are dropped before they get an id
        if op == ACQ:
            key = (t, x)
            d = self._depth.get(key, 0)
            if d:
                self._depth[key] = d + 1
                return []
            if x in self._owner:
                raise StreamError(f"line {ev.line}: lock acquired while held by another thread", ev.line)
        elif op == REL:
            key = (t, x)
            d = self._depth.get(key, 0)
            if d == 0:
                raise StreamError(f"line {ev.line}: release of a lock the thread does not hold", ev.line)
            if d > 1:
                self._depth[key] = d - 1
                return []
        elif op == FORK and (x in self._started or x in self._forked):
            raise StreamError(f"line {ev.line}: fork of a thread that already ran", ev.line)

        eid = self.n
        self.n += 1
        self._started.add(t)
        out: list[DeadlockReport] = []
        C = self.C
        if op == WRITE:
            self.LW[x] = C[t]
            C[t] = _inc(C[t], t)
        elif op == READ:
            if x in self.LW:
                C[t] = _join(C[t], self.LW[x])
        elif op == ACQ:
            out = self._acquire(t, x, eid, ev.loc)
            self._depth[(t, x)] = 1
            self._owner[x] = t
            self._held[t].add(x)
        elif op == REL:
            C[t] = _inc(C[t], t)
            self.cs[(t, x)][-1].rel = C[t]
            self._depth[(t, x)] = 0
            del self._owner[x]
            self._held[t].discard(x)
        elif op == FORK:
            C[x] = _join(C[x], C[t])
            C[t] = _inc(C[t], t)
            self._forked.add(x)
        elif op == JOIN:
            C[t] = _join(C[t], C[x])
            self._joined.add(x)
        elif op != REQ:
            raise StreamError(f"unknown operation {op!r}", ev.line)
        for rep in out:
            self.reports.append(rep)
            if self.sink is not None:
                self.sink(rep)
        return out

    def _acquire(self, t: int, lock: int, eid: int, loc: str | None) -> list[DeadlockReport]:
        C = self.C
        c_prev = C[t]
        C[t] = cur = _inc(c_prev, t)
        g = self.g[lock] = self.g.get(lock, 0) + 1
        log = self.cs.get((t, lock))
        if log is None:
            log = self.cs[(t, lock)] = []
            self.cs_threads.setdefault(lock, []).append(t)
        log.append(_CS(g, cur, None))
        held = sorted(self._held[t])
        entry = _Acq(c_prev, cur, eid, loc)
        for l2 in held:
            self.acq.setdefault((t, lock, l2), []).append(entry)
            self.acq_threads.setdefault((lock, l2), set()).add(t)
        out = []
        for l2 in held:
            for u in sorted(self.acq_threads.get((l2, lock), ())):
                if u == t:
                    continue
                key = (u, l2, t, lock)
                I = _join(self.I.get(key, self._zero), c_prev)
                self.I[key] = self._check(key, I, t, lock, eid, loc, out)
        return out

    def _check(self, key, I, t, lock, eid, loc, out) -> VectorClock:
        u, l2 = key[0], key[1]
        q = self.acq[(u, l2, lock)]
        ckey = (u, l2, lock, t)
        i = self.acq_cursor.get(ckey, 0)
        while i < len(q):
            other = q[i]
            I = self._fixpoint(_join(I, other.prev), key)
            i += 1
            if not _leq(other.acq, I):
                out.append(self._report(other, u, l2, eid, t, lock, loc))
                break
            self.pops += 1
        self.acq_cursor[ckey] = i
        return I

    def _fixpoint(self, I: VectorClock, key) -> VectorClock:
        view = self.views.setdefault(key, {})
        changed = True
        while changed:
            changed = False
            for lock, threads in self.cs_threads.items():
                selected = []
                for th in threads:
                    log = self.cs[(th, lock)]
                    h = view.get((th, lock), 0)
                    if h >= len(log) or not _leq(log[h].acq, I):
                        continue
                    while h + 1 < len(log) and _leq(log[h + 1].acq, I):
                        h += 1
                        self.pops += 1
                    view[(th, lock)] = h
                    selected.append(log[h])
                if len(selected) < 2:
                    continue
                latest = max(selected, key=lambda en: en.g)
                for en in selected:
                    if en is latest:
                        continue
                    # an older critical section whose lock was re-acquired
                    # later is necessarily closed already
                    assert en.rel is not None
                    if not _leq(en.rel, I):
                        I = _join(I, en.rel)
                        changed = True
        return I

    def _report(self, other: _Acq, u, l2, eid, t, lock, loc) -> DeadlockReport:
        names_t = self.parser.thread_names
        names_l = self.parser.lock_names
        pid = self.pattern_ids.setdefault(frozenset({(u, l2), (t, lock)}), len(self.pattern_ids))
        locs = [other.loc, loc]
        return DeadlockReport(
            SP_KIND,
            (other.event, eid),
            [names_t[u], names_t[t]],
            [names_l[l2], names_l[lock]],
            pid,
            locs if any(x is not None for x in locs) else None,
        )


def first_reports(reports: Iterable[DeadlockReport]) -> list[DeadlockReport]:
    """The first report emitted for each abstract pattern, in emission order."""
    seen = set()
    out = []
    for r in reports:
        if r.abstract_pattern not in seen:
            seen.add(r.abstract_pattern)
            out.append(r)
    return out


def spd_online(trace: Trace) -> OnlineEngine:
    """Stream an already parsed trace through a fresh engine."""
    eng = OnlineEngine.for_trace(trace)
    eng.feed_all(trace.events)
    return eng


def stream_lines(lines: Iterable[str], sink=None) -> OnlineEngine:
    eng = OnlineEngine(sink=sink)
    for lineno, text in enumerate(lines, 1):
        eng.feed_line(text, lineno)
    return eng
