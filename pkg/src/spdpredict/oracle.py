"""Exhaustive ground truth on small traces.

Everything here works on explicit event sets and explicit interleavings and
shares no code with the timestamp based engines, so the two can be checked
against each other.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from .trace import ACQ, JOIN, READ, REL, WRITE, ConcretePattern, ResourceLimit, Trace, enumerate_patterns_bruteforce

DEFAULT_MAX_EVENTS = 25
DEFAULT_MAX_STATES = 2_000_000


class _Explorer:
    """Breadth-first search over prefixes of correct reorderings.

    A state is the per-thread count of executed events plus the last writer
    of every variable; lock ownership follows from the counts.
    """

    def __init__(self, trace: Trace, sync_preserving: bool, max_states: int):
        self.trace = trace
        self.sp = sync_preserving
        self.max_states = max_states
        T = trace.n_threads
        # held_after[t][p]: locks held by t after its first p events
        self.held_after = []
        for t in range(T):
            evs = trace.per_thread[t]
            hs = [trace.held[e] for e in evs]
            cur = set(hs[-1]) if hs else set()
            if evs:
                last = trace.events[evs[-1]]
                if last.op == ACQ:
                    cur.add(last.target)
                elif last.op == REL:
                    cur.discard(last.target)
            hs.append(frozenset(cur))
            self.held_after.append(hs)
        self.acqs_of_lock: dict[int, list[int]] = {}
        for ev in trace.events:
            if ev.op == ACQ:
                self.acqs_of_lock.setdefault(ev.target, []).append(ev.id)

    def executed(self, pos: tuple[int, ...], e: int) -> bool:
        return pos[self.trace.events[e].thread] > self.trace.pos[e]

    def enabled_next(self, pos, lw, t):
        tr = self.trace
        evs = tr.per_thread[t]
        p = pos[t]
        if p >= len(evs):
            return None
        e = evs[p]
        ev = tr.events[e]
        if p == 0 and t in tr.fork_of and not self.executed(pos, tr.fork_of[t]):
            return None
        op = ev.op
        if op == ACQ:
            for u, hs in enumerate(self.held_after):
                if ev.target in hs[pos[u]]:
                    return None
            if self.sp:
                for a in self.acqs_of_lock[ev.target]:
                    if a > e and self.executed(pos, a):
                        return None
        elif op == READ:
            if lw[ev.target] != tr.rf.get(e, -1):
                return None
        elif op == JOIN:
            if pos[ev.target] < len(tr.per_thread[ev.target]):
                return None
        return e

    def explore(self):
        tr = self.trace
        T = tr.n_threads
        start = ((0,) * T, (-1,) * tr.n_vars)
        parent = {start: None}
        frontier = [start]
        while frontier:
            nxt = []
            for state in frontier:
                pos, lw = state
                for t in range(T):
                    e = self.enabled_next(pos, lw, t)
                    if e is None:
                        continue
                    ev = tr.events[e]
                    npos = pos[:t] + (pos[t] + 1,) + pos[t + 1 :]
                    nlw = lw
                    if ev.op == WRITE:
                        nlw = lw[: ev.target] + (e,) + lw[ev.target + 1 :]
                    ns = (npos, nlw)
                    if ns in parent:
                        continue
                    parent[ns] = (state, e)
                    if len(parent) > self.max_states:
                        raise ResourceLimit(f"more than {self.max_states} reordering states")
                    nxt.append(ns)
            frontier = nxt
        return parent


def _path(parent, state) -> list[int]:
    out = []
    while parent[state] is not None:
        state, e = parent[state]
        out.append(e)
    return out[::-1]


def _search(trace: Trace, k: int, sync_preserving: bool, max_states: int, max_events: int):
    if len(trace) > max_events:
        raise ResourceLimit(f"trace has {len(trace)} events, oracle bound is {max_events}")
    patterns = enumerate_patterns_bruteforce(trace, k)
    if not patterns:
        return {}
    parent = _Explorer(trace, sync_preserving, max_states).explore()
    by_pos: dict[tuple[int, ...], tuple] = {}
    for state in parent:
        by_pos.setdefault(state[0], state)
    found = {}
    for pat in sorted(patterns):
        want = {trace.events[e].thread: trace.pos[e] for e in pat}
        for pos, state in by_pos.items():
            if all(pos[t] == p for t, p in want.items()):
                found[pat] = _path(parent, state)
                break
    return found


def oracle_predictable_witnesses(
    trace: Trace, k: int, max_states: int = DEFAULT_MAX_STATES, max_events: int = DEFAULT_MAX_EVENTS
) -> dict[ConcretePattern, list[int]]:
    return _search(trace, k, False, max_states, max_events)


def oracle_sp_witnesses(
    trace: Trace, k: int, max_states: int = DEFAULT_MAX_STATES, max_events: int = DEFAULT_MAX_EVENTS
) -> dict[ConcretePattern, list[int]]:
    return _search(trace, k, True, max_states, max_events)


def oracle_predictable_deadlocks(trace: Trace, k: int, **limits) -> set[ConcretePattern]:
    """Size-``k`` patterns realizable by some correct reordering."""
    return set(oracle_predictable_witnesses(trace, k, **limits))


def oracle_sp_deadlocks(trace: Trace, k: int, **limits) -> set[ConcretePattern]:
    """Size-``k`` patterns realizable by a reordering that keeps same-lock acquires in order."""
    return set(oracle_sp_witnesses(trace, k, **limits))


def naive_sp_closure(trace: Trace, seed: Iterable[int]) -> set[int]:
    """Smallest superset of ``seed`` closed under thread order, reads-from,
    fork/join, and the same-lock release rule.  Returns every event when a
    required release does not exist."""
    S = set(seed)
    acqs = [ev for ev in trace.events if ev.op == ACQ]
    while True:
        new = set(S)
        for e in S:
            ev = trace.events[e]
            new.update(trace.per_thread[ev.thread][: trace.pos[e]])
            if e in trace.rf:
                new.add(trace.rf[e])
            new.update(trace.order_preds.get(e, ()))
        for a in acqs:
            if a.id not in new:
                continue
            for b in acqs:
                if b.target == a.target and b.id > a.id and b.id in new:
                    r = trace.release_of.get(a.id)
                    if r is None:
                        return set(range(len(trace)))
                    new.add(r)
                    break
        if new == S:
            return S
        S = new


def check_witness(trace: Trace, seq: Sequence[int], pattern: Sequence[int], sync_preserving: bool) -> bool:
    """Is ``seq`` a correct reordering in which every pattern event is enabled?"""
    if len(set(seq)) != len(seq):
        return False
    done: set[int] = set()
    owner: dict[int, int] = {}
    last_write: dict[int, int] = {}
    last_acq: dict[int, int] = {}
    for e in seq:
        ev = trace.events[e]
        p = trace.prev(e)
        if p is not None and p not in done:
            return False
        if any(q not in done for q in trace.order_preds.get(e, ())):
            return False
        if ev.op == ACQ:
            if ev.target in owner:
                return False
            if sync_preserving and last_acq.get(ev.target, -1) > e:
                return False
            owner[ev.target] = ev.thread
            last_acq[ev.target] = max(e, last_acq.get(ev.target, -1))
        elif ev.op == REL:
            if owner.get(ev.target) != ev.thread:
                return False
            del owner[ev.target]
        elif ev.op == WRITE:
            last_write[ev.target] = e
        elif ev.op == READ:
            if last_write.get(ev.target) != trace.rf.get(e):
                return False
        done.add(e)
    for e in pattern:
        p = trace.prev(e)
        if e in done or (p is not None and p not in done):
            return False
    return True
