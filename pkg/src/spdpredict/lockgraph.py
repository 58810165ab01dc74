"""Abstract acquires, the abstract lock graph and its cycles."""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from .trace import ACQ, Trace
from .vclock import TimestampTable, VectorClock


@dataclass(frozen=True, slots=True)
class FEntry:
    event: int
    prev_ts: VectorClock
    acq_ts: VectorClock
    g: int


@dataclass
class AbstractAcquire:
    id: int
    thread: int
    lock: int
    held: frozenset[int]
    F: list[FEntry] = field(default_factory=list)

    @property
    def events(self) -> list[int]:
        return [f.event for f in self.F]


@dataclass
class AbstractLockGraph:
    nodes: list[AbstractAcquire]
    succ: list[list[int]]

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, out in enumerate(self.succ) for b in out]


@dataclass
class AbstractPattern:
    id: int
    nodes: tuple[AbstractAcquire, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def instantiations(self) -> Iterator[tuple[int, ...]]:
        return product(*(n.events for n in self.nodes))

    @property
    def n_concrete(self) -> int:
        out = 1
        for n in self.nodes:
            out *= len(n.F)
        return out


def compute_abstract_acquires(trace: Trace, ts: TimestampTable) -> list[AbstractAcquire]:
    """Group nested acquires by (thread, lock, held set), in order of first appearance."""
    nodes: dict[tuple[int, int, frozenset[int]], AbstractAcquire] = {}
    for ev in trace.events:
        if ev.op != ACQ:
            continue
        held = trace.held[ev.id]
        if not held:
            continue
        key = (ev.thread, ev.target, held)
        node = nodes.get(key)
        if node is None:
            node = nodes[key] = AbstractAcquire(len(nodes), ev.thread, ev.target, held)
        # a nested acquire always has a thread predecessor (the outer acquire)
        node.F.append(FEntry(ev.id, ts[trace.prev(ev.id)], ts[ev.id], trace.lock_index[ev.id]))
    return list(nodes.values())


def build_graph(nodes: list[AbstractAcquire]) -> AbstractLockGraph:
    by_lock: dict[int, list[AbstractAcquire]] = {}
    for n in nodes:
        by_lock.setdefault(n.lock, []).append(n)
    succ: list[set[int]] = [set() for _ in nodes]
    for n2 in nodes:
        for lock in n2.held:
            for n1 in by_lock.get(lock, ()):
                if n1.thread != n2.thread and not (n1.held & n2.held):
                    succ[n1.id].add(n2.id)
    return AbstractLockGraph(nodes, [sorted(s) for s in succ])


class CycleList(list):
    """Canonical cycles plus a flag telling whether the cap cut enumeration short."""

    cap_exceeded: bool = False


def canonical_cycle(cycle: Iterable[int]) -> tuple[int, ...]:
    c = tuple(cycle)
    i = c.index(min(c))
    return c[i:] + c[:i]


def enumerate_cycles(g: AbstractLockGraph, max_len: int = 4, cap: int = 10_000) -> CycleList:
    """Simple cycles of length at most ``max_len``, each once, sorted by (length, nodes)."""
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    dg = nx.DiGraph()
    dg.add_nodes_from(range(len(g.nodes)))
    dg.add_edges_from(g.edges())
    out = CycleList()
    for cyc in nx.simple_cycles(dg, length_bound=max_len):
        if len(out) >= cap:
            out.cap_exceeded = True
            break
        out.append(canonical_cycle(cyc))
    out.sort(key=lambda c: (len(c), c))
    return out


def filter_abstract_patterns(g: AbstractLockGraph, cycles: Iterable[tuple[int, ...]]) -> list[AbstractPattern]:
    out = []
    for cyc in cycles:
        nodes = [g.nodes[i] for i in cyc]
        k = len(nodes)
        if len({n.thread for n in nodes}) != k or len({n.lock for n in nodes}) != k:
            continue
        if any(nodes[i].held & nodes[j].held for i in range(k) for j in range(i + 1, k)):
            continue
        out.append(AbstractPattern(len(out), tuple(nodes)))
    return out
