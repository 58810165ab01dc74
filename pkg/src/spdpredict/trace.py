"""Execution traces: parsing, well-formedness checks and derived relations.

A trace file holds one event per line::

    <thread>|<op>(<arg>)[|<loc>]

with ``<op>`` one of ``acq``, ``rel``, ``r``, ``w``, ``fork``, ``join`` and
``req``.  Lines starting with ``#`` are comments.  Threads, locks and
variables are interned to dense integers in order of first appearance.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace

log = logging.getLogger(__name__)

ACQ = "acq"
REL = "rel"
READ = "r"
WRITE = "w"
FORK = "fork"
JOIN = "join"
REQ = "req"

LOCK_OPS = frozenset({ACQ, REL, REQ})
VAR_OPS = frozenset({READ, WRITE})
THREAD_OPS = frozenset({FORK, JOIN})

_IDENT = r"[A-Za-z0-9_.$:-]+"
_LINE_RE = re.compile(
    rf"^(?P<thread>{_IDENT})\|(?P<op>acq|rel|r|w|fork|join|req)\((?P<arg>{_IDENT})\)(?:\|(?P<loc>.*))?$"
)


class TraceError(Exception):
    """Base class for all trace related failures."""


class TraceSyntaxError(TraceError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class IdClash(TraceSyntaxError):
    """An identifier is used both as a lock and as a variable."""


class ValidationError(TraceError):
    def __init__(self, message: str, event: int | None = None):
        super().__init__(message)
        self.event = event


class ReleaseWithoutAcquire(ValidationError):
    pass


class OverlappingCriticalSections(ValidationError):
    pass


class JoinBeforeLastEvent(ValidationError):
    pass


class ForkAfterStart(ValidationError):
    pass


class NotAPattern(TraceError):
    pass


class ResourceLimit(TraceError):
    """A configured search cap was hit; ``partial`` holds what was found so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, slots=True)
class Event:
    id: int
    thread: int
    op: str
    # lock, variable or child thread id depending on ``op``
    target: int
    loc: str | None = None
    line: int = 0


class TraceParser:
    """Incremental line parser with its own interning tables.

    Used by :func:`parse_trace` and directly by the streaming detector.
    """

    def __init__(self) -> None:
        self.thread_names: list[str] = []
        self.lock_names: list[str] = []
        self.var_names: list[str] = []
        self._threads: dict[str, int] = {}
        self._locks: dict[str, int] = {}
        self._vars: dict[str, int] = {}
        self.count = 0

    def _intern(self, table: dict[str, int], names: list[str], name: str) -> int:
        idx = table.get(name)
        if idx is None:
            idx = table[name] = len(names)
            names.append(name)
        return idx

    def thread_id(self, name: str) -> int:
        return self._intern(self._threads, self.thread_names, name)

    def parse_line(self, text: str, lineno: int) -> Event | None:
        text = text.strip()
        if not text or text.startswith("#"):
            return None
        m = _LINE_RE.match(text)
        if m is None:
            raise TraceSyntaxError(lineno, f"malformed event {text!r}")
        op, arg = m["op"], m["arg"]
        thread = self.thread_id(m["thread"])
        if op in LOCK_OPS:
            if arg in self._vars:
                raise IdClash(lineno, f"{arg!r} used both as variable and lock")
            target = self._intern(self._locks, self.lock_names, arg)
        elif op in VAR_OPS:
            if arg in self._locks:
                raise IdClash(lineno, f"{arg!r} used both as lock and variable")
            target = self._intern(self._vars, self.var_names, arg)
        else:
            if arg == m["thread"]:
                raise TraceSyntaxError(lineno, f"thread {arg!r} cannot {op} itself")
            target = self.thread_id(arg)
        loc = m["loc"]
        ev = Event(self.count, thread, op, target, loc if loc else None, lineno)
        self.count += 1
        return ev


@dataclass
class Trace:
    events: list[Event]
    thread_names: list[str]
    lock_names: list[str]
    var_names: list[str]

    # Derived relations, filled in by validate().
    indexed: bool = False
    per_thread: list[list[int]] = field(default_factory=list)
    pos: list[int] = field(default_factory=list)
    rf: dict[int, int] = field(default_factory=dict)
    release_of: dict[int, int] = field(default_factory=dict)
    acquire_of: dict[int, int] = field(default_factory=dict)
    held: list[frozenset[int]] = field(default_factory=list)
    lock_index: dict[int, int] = field(default_factory=dict)
    # fork/join ordering edges: event -> extra predecessors
    order_preds: dict[int, tuple[int, ...]] = field(default_factory=dict)
    fork_of: dict[int, int] = field(default_factory=dict)
    dropped_reentrant: int = 0

    def __len__(self) -> int:
        return len(self.events)

    @property
    def n_threads(self) -> int:
        return len(self.thread_names)

    @property
    def n_locks(self) -> int:
        return len(self.lock_names)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def acquires(self) -> list[int]:
        return [e.id for e in self.events if e.op == ACQ]

    @property
    def n_acquires(self) -> int:
        return sum(1 for e in self.events if e.op == ACQ)

    @property
    def n_requests(self) -> int:
        return sum(1 for e in self.events if e.op == REQ)

    @property
    def nesting_depth(self) -> int:
        self._require_index()
        return max((len(self.held[e.id]) + 1 for e in self.events if e.op == ACQ), default=0)

    def prev(self, e: int) -> int | None:
        """Immediate thread predecessor of ``e``."""
        self._require_index()
        p = self.pos[e]
        return self.per_thread[self.events[e].thread][p - 1] if p else None

    def _require_index(self) -> None:
        if not self.indexed:
            raise TraceError("trace has not been validated")

    def describe(self, e: int) -> str:
        ev = self.events[e]
        return f"{self.thread_names[ev.thread]}|{ev.op}({self.target_name(ev)})"

    def target_name(self, ev: Event) -> str:
        if ev.op in LOCK_OPS:
            return self.lock_names[ev.target]
        if ev.op in VAR_OPS:
            return self.var_names[ev.target]
        return self.thread_names[ev.target]


def parse_trace(source: str | Iterable[str]) -> Trace:
    """Parse trace text (a string or an iterable of lines) without validating it."""
    lines = source.splitlines() if isinstance(source, str) else source
    parser = TraceParser()
    events = []
    for lineno, text in enumerate(lines, 1):
        ev = parser.parse_line(text, lineno)
        if ev is not None:
            events.append(ev)
    return Trace(events, parser.thread_names, parser.lock_names, parser.var_names)


def serialize(trace: Trace) -> str:
    out = []
    for ev in trace.events:
        line = f"{trace.thread_names[ev.thread]}|{ev.op}({trace.target_name(ev)})"
        if ev.loc is not None:
            line += f"|{ev.loc}"
        out.append(line)
    return "\n".join(out) + ("\n" if out else "")


def load_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return validate(parse_trace(fh))


def _normalize_reentrancy(events: list[Event]) -> tuple[list[Event], int]:
    depth: dict[tuple[int, int], int] = {}
    owner: dict[int, int] = {}
    kept = []
    dropped = 0
    for ev in events:
        if ev.op == ACQ:
            key = (ev.thread, ev.target)
            d = depth.get(key, 0)
            if d:
                depth[key] = d + 1
                dropped += 1
                continue
            holder = owner.get(ev.target)
            if holder is not None:
                raise OverlappingCriticalSections(
                    f"event {ev.id} (line {ev.line}) acquires lock #{ev.target} held by thread #{holder}",
                    ev.id,
                )
            owner[ev.target] = ev.thread
            depth[key] = 1
        elif ev.op == REL:
            key = (ev.thread, ev.target)
            d = depth.get(key, 0)
            if d == 0:
                raise ReleaseWithoutAcquire(
                    f"event {ev.id} (line {ev.line}) releases lock #{ev.target} not held by its thread",
                    ev.id,
                )
            depth[key] = d - 1
            if d > 1:
                dropped += 1
                continue
            del owner[ev.target]
        kept.append(ev)
    return kept, dropped


def validate(trace: Trace) -> Trace:
    """Check well-formedness and compute the derived relations.

    Reentrant re-acquisitions are collapsed: only the outermost acquire and
    release of a (thread, lock) pair survive, and events are renumbered.
    Returns a new, indexed trace.
    """
    kept, dropped = _normalize_reentrancy(trace.events)
    if dropped:
        log.warning("dropped %d reentrant acquire/release event(s)", dropped)
    events = [replace(ev, id=i) for i, ev in enumerate(kept)]

    n_threads = len(trace.thread_names)
    per_thread: list[list[int]] = [[] for _ in range(n_threads)]
    pos = []
    rf = {}
    release_of = {}
    acquire_of = {}
    held = []
    lock_index = {}
    last_write: dict[int, int] = {}
    open_acq: dict[tuple[int, int], int] = {}
    cur_held = [frozenset()] * n_threads
    g = [0] * len(trace.lock_names)
    fork_of: dict[int, int] = {}
    joined: dict[int, int] = {}
    order_preds: dict[int, list[int]] = {}

    for ev in events:
        e, t = ev.id, ev.thread
        if t in joined:
            raise JoinBeforeLastEvent(
                f"event {e} (line {ev.line}) runs in a thread already joined at event {joined[t]}", e
            )
        if not per_thread[t] and t in fork_of:
            order_preds.setdefault(e, []).append(fork_of[t])
        pos.append(len(per_thread[t]))
        per_thread[t].append(e)
        held.append(cur_held[t])
        op = ev.op
        if op == ACQ:
            open_acq[(t, ev.target)] = e
            g[ev.target] += 1
            lock_index[e] = g[ev.target]
            cur_held[t] = cur_held[t] | {ev.target}
        elif op == REL:
            a = open_acq.pop((t, ev.target))
            release_of[a] = e
            acquire_of[e] = a
            cur_held[t] = cur_held[t] - {ev.target}
        elif op == WRITE:
            last_write[ev.target] = e
        elif op == READ:
            w = last_write.get(ev.target)
            if w is not None:
                rf[e] = w
        elif op == FORK:
            u = ev.target
            if per_thread[u]:
                raise ForkAfterStart(f"event {e} (line {ev.line}) forks a thread that already ran", e)
            if u in fork_of:
                raise ForkAfterStart(f"event {e} (line {ev.line}) forks a thread twice", e)
            fork_of[u] = e
        elif op == JOIN:
            u = ev.target
            if per_thread[u]:
                order_preds.setdefault(e, []).append(per_thread[u][-1])
            joined[u] = e

    return Trace(
        events,
        trace.thread_names,
        trace.lock_names,
        trace.var_names,
        indexed=True,
        per_thread=per_thread,
        pos=pos,
        rf=rf,
        release_of=release_of,
        acquire_of=acquire_of,
        held=held,
        lock_index=lock_index,
        order_preds={e: tuple(p) for e, p in order_preds.items()},
        fork_of=fork_of,
        dropped_reentrant=dropped,
    )


# --- deadlock patterns -----------------------------------------------------

ConcretePattern = tuple[int, ...]


def canonical_pattern(events: Iterable[int]) -> ConcretePattern:
    """Rotate a cyclic event sequence so that it starts at its smallest id."""
    events = tuple(events)
    i = events.index(min(events))
    return events[i:] + events[:i]


def is_deadlock_pattern(trace: Trace, events: tuple[int, ...]) -> bool:
    k = len(events)
    if k < 2:
        return False
    evs = [trace.events[e] for e in events]
    if any(ev.op != ACQ for ev in evs):
        return False
    if len({ev.thread for ev in evs}) != k or len({ev.target for ev in evs}) != k:
        return False
    for i in range(k):
        if evs[i].target not in trace.held[events[(i + 1) % k]]:
            return False
        for j in range(i + 1, k):
            if trace.held[events[i]] & trace.held[events[j]]:
                return False
    return True


def iter_patterns_bruteforce(trace: Trace, k: int, cap: int = 10_000_000) -> Iterator[ConcretePattern]:
    """Yield every size-``k`` deadlock pattern once, in canonical rotation.

    Plain enumeration of acquire chains e_0, ..., e_{k-1} where each e_{i+1}
    holds the lock taken at e_i; e_0 is the smallest id of the chain.
    """
    trace._require_index()
    if k < 2:
        raise ValueError("pattern size must be at least 2")
    held = trace.held
    evs = trace.events
    acquires = [e.id for e in evs if e.op == ACQ and held[e.id]]
    held_by: dict[int, list[int]] = {}
    for a in acquires:
        for lock in held[a]:
            held_by.setdefault(lock, []).append(a)

    budget = [cap]
    found: list[ConcretePattern] = []

    def extend(chain: list[int], threads: set[int], locks: set[int], union: frozenset[int]):
        last = chain[-1]
        for nxt in held_by.get(evs[last].target, ()):
            if nxt <= chain[0]:
                continue
            budget[0] -= 1
            if budget[0] < 0:
                raise ResourceLimit(f"more than {cap} candidate chains", partial=set(found))
            ev = evs[nxt]
            if ev.thread in threads or ev.target in locks or held[nxt] & union:
                continue
            chain.append(nxt)
            if len(chain) == k:
                if ev.target in held[chain[0]]:
                    pat = tuple(chain)
                    found.append(pat)
                    yield pat
            else:
                threads.add(ev.thread)
                locks.add(ev.target)
                yield from extend(chain, threads, locks, union | held[nxt])
                threads.discard(ev.thread)
                locks.discard(ev.target)
            chain.pop()

    for a in acquires:
        ev = evs[a]
        yield from extend([a], {ev.thread}, {ev.target}, held[a])


def enumerate_patterns_bruteforce(trace: Trace, k: int, cap: int = 10_000_000) -> set[ConcretePattern]:
    return set(iter_patterns_bruteforce(trace, k, cap))


def has_pattern(trace: Trace, k: int) -> bool:
    return next(iter_patterns_bruteforce(trace, k), None) is not None
