"""Trace generators: the two hardness reductions and a seeded random generator."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .trace import Trace, parse_trace, validate


class InfeasibleParams(ValueError):
    pass


@dataclass(frozen=True)
class UGraph:
    """Simple undirected graph on vertices 1..n; ``edges`` holds (u, v) with u < v
    and its sorted order is the edge order used by the reduction."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            if u == v or not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"bad edge ({u}, {v}) for {self.n} vertices")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def neighbours(self, v: int) -> list[tuple[int, int]]:
        return [e for e in self.edges if v in e]


@dataclass(frozen=True)
class OVInstance:
    A: tuple[tuple[int, ...], ...]
    B: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = self.A + self.B
        if not rows:
            raise ValueError("empty instance")
        d = len(rows[0])
        if d < 1 or any(len(r) != d or any(x not in (0, 1) for x in r) for r in rows):
            raise ValueError("vectors must be 0/1 rows of one common dimension")

    @property
    def d(self) -> int:
        return len((self.A + self.B)[0])


def _nest(thread: str, locks: list[str], inner: list[str]) -> list[str]:
    # locks[0] is outermost
    out = [f"{thread}|acq({l})" for l in locks]
    out += inner
    out += [f"{thread}|rel({l})" for l in reversed(locks)]
    return out


def independent_set_text(g: UGraph, c: int) -> str:
    """Trace with a size-``c`` deadlock pattern iff ``g`` has an independent set of size ``c``.

    Thread i runs one block per vertex v: critical sections on the locks of
    v's edges (last edge outermost) around an inner pair on M{i%c} then
    M{(i+1)%c}.  An isolated vertex gets a private lock L_v_v in place of
    edge locks so that two threads cannot both pick it.
    """
    if c < 2:
        raise ValueError("c must be at least 2")
    lines = []
    for i in range(1, c + 1):
        th = f"T{i}"
        m1, m2 = f"M{i % c}", f"M{(i + 1) % c}"
        for v in range(1, g.n + 1):
            edge_locks = [f"L_{a}_{b}" for a, b in g.neighbours(v)] or [f"L_{v}_{v}"]
            inner = _nest(th, [m1, m2], [])
            lines += _nest(th, edge_locks[::-1], inner)
    return "\n".join(lines) + ("\n" if lines else "")


def gen_independent_set_trace(g: UGraph, c: int) -> Trace:
    return validate(parse_trace(independent_set_text(g, c)))


def ov_text(inst: OVInstance) -> str:
    """Two-thread trace with a size-2 deadlock pattern iff some a in A and b in B are orthogonal."""
    lines = []
    for th, rows, (m, m2) in (("TA", inst.A, ("M0", "M1")), ("TB", inst.B, ("M1", "M0"))):
        for row in rows:
            locks = [f"L{j}" for j in range(inst.d, 0, -1) if row[j - 1]]
            lines += _nest(th, locks, _nest(th, [m, m2], []))
    return "\n".join(lines) + "\n"


def gen_ov_trace(inst: OVInstance) -> Trace:
    return validate(parse_trace(ov_text(inst)))


def _thread_program(rng: random.Random, t: int, budget: int, locks: int, vars: int, nesting: int):
    """Random op list of exactly ``budget`` events for thread ``t``.

    Items are (text, block_locks); block_locks is set on the first acquire of
    a nested block and names every lock the block will take.
    """
    prog = []

    def rw():
        return (f"T{t}|{rng.choice('rw')}(X{rng.randrange(vars)})", None)

    while budget > 0:
        if budget >= 2 and locks and nesting and (rng.random() < 0.6 or not vars):
            top = min(nesting, locks, budget // 2)
            d = top if rng.random() < 0.7 else rng.randint(1, top)
            held = rng.sample(range(locks), d)
            rels = held[::-1]
            if d > 1 and rng.random() < 0.2:
                rng.shuffle(rels)
            ops = [f"T{t}|acq(L{l})" for l in held] + [f"T{t}|rel(L{l})" for l in rels]
            body = rng.randint(0, min(2, budget - 2 * d)) if vars else 0
            for _ in range(body):
                # strictly inside the outermost section
                i = rng.randint(1, len(ops) - 1)
                ops.insert(i, rw()[0])
            prog.append((ops[0], frozenset(held)))
            prog += [(op, None) for op in ops[1:]]
            budget -= len(ops)
        elif vars:
            prog.append(rw())
            budget -= 1
        else:
            prog.append((f"T{t}|req(L{rng.randrange(max(locks, 1))})", None))
            budget -= 1
    return prog


def random_trace_text(
    threads: int,
    locks: int,
    vars: int,
    length: int,
    nesting: int,
    seed: int,
    forks: bool = False,
) -> str:
    """Well-formed random trace of exactly ``length`` events.

    Each thread gets a random program of nested critical sections and
    accesses; a bursty scheduler then interleaves the programs.  A block's
    locks are reserved when it starts, so scheduling never gets stuck.  With
    ``forks`` thread T0 forks the other threads before they run and joins
    them later.
    """
    if threads < 1 or length < 0 or locks < 0 or vars < 0 or nesting < 0:
        raise InfeasibleParams("negative or empty parameters")
    if nesting > locks:
        raise InfeasibleParams(f"nesting {nesting} exceeds lock count {locks}")
    rng = random.Random(seed)
    children = list(range(1, threads)) if forks else []
    while children and length < 1 + 2 * len(children) + len(children):
        children.pop()
    budget = length - 2 * len(children)
    # random composition of the budget, every forked child gets at least one event
    share = [0] * threads
    for t in children:
        share[t] = 1
    for _ in range(budget - len(children)):
        share[rng.randrange(threads if not forks else len(children) + 1)] += 1
    progs = [_thread_program(rng, t, share[t], locks, vars, nesting) for t in range(threads)]
    if children:
        # forks go between T0's blocks, joins after everything else of T0
        main = progs[0]
        cuts = [i for i in range(len(main) + 1) if i == len(main) or main[i][1] is not None or _depth0(main, i)]
        for u in sorted(children, reverse=True):
            i = rng.choice(cuts[: max(1, len(cuts) // 2)])
            main.insert(i, (f"T0|fork(T{u})", None))
            cuts = [c + (c >= i) for c in cuts]
        for u in children:
            main.append((f"T0|join(T{u})", ("join", u)))

    pc = [0] * threads
    started = {0} | (set() if forks else set(range(threads)))
    reserved: dict[int, int] = {}
    depth = [0] * threads
    block = [frozenset()] * threads
    lines = []
    cur = 0

    def ready(t):
        if t not in started or pc[t] >= len(progs[t]):
            return False
        text, meta = progs[t][pc[t]]
        if isinstance(meta, frozenset):
            return all(l not in reserved for l in meta)
        if isinstance(meta, tuple):
            return pc[meta[1]] >= len(progs[meta[1]])
        return True

    while len(lines) < length:
        if rng.random() > 0.5 or not ready(cur):
            cands = [t for t in range(threads) if ready(t)]
            cur = rng.choice(cands)
        t = cur
        text, meta = progs[t][pc[t]]
        pc[t] += 1
        lines.append(text)
        if isinstance(meta, frozenset):
            block[t] = meta
            for l in meta:
                reserved[l] = t
        op = text.split("|", 1)[1]
        if op.startswith("acq"):
            depth[t] += 1
        elif op.startswith("rel"):
            depth[t] -= 1
            if depth[t] == 0:
                for l in block[t]:
                    del reserved[l]
                block[t] = frozenset()
        elif op.startswith("fork"):
            started.add(int(op[len("fork(T") : -1]))
    return "\n".join(lines) + ("\n" if lines else "")


def _depth0(prog, i) -> bool:
    """Is position ``i`` of a program outside every critical section?"""
    d = 0
    for text, _ in prog[:i]:
        op = text.split("|", 1)[1]
        d += op.startswith("acq") - op.startswith("rel")
    return d == 0


def gen_random_trace(
    threads: int, locks: int, vars: int, length: int, nesting: int, seed: int, forks: bool = False
) -> Trace:
    return validate(parse_trace(random_trace_text(threads, locks, vars, length, nesting, seed, forks)))


def parse_graph(text: str) -> UGraph:
    """Edge list, one ``u v`` pair per line over vertices 1..n.

    An optional ``n <count>`` line declares vertices that have no edges.
    """
    n = 0
    edges = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n" and len(parts) == 2:
            n = max(n, int(parts[1]))
            continue
        if len(parts) != 2:
            raise ValueError(f"bad edge line {raw!r}")
        u, v = int(parts[0]), int(parts[1])
        edges.append((u, v))
        n = max(n, u, v)
    return UGraph(n, tuple(edges))


def parse_ov(text: str) -> OVInstance:
    """Rows ``A <bits>`` or ``B <bits>``; bits may be run together or space separated."""
    A, B = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        side, _, bits = line.partition(" ")
        row = tuple(int(ch) for ch in bits if ch in "01")
        if side == "A":
            A.append(row)
        elif side == "B":
            B.append(row)
        else:
            raise ValueError(f"bad OV line {raw!r}")
    return OVInstance(tuple(A), tuple(B))
