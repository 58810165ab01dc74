"""Sync-preserving deadlock prediction for concurrent execution traces."""

__version__ = "0.1.0"

from .closure import ClosureState, comp_sp_closure, is_sp_deadlock, prev_set
from .lockgraph import build_graph, compute_abstract_acquires, enumerate_cycles, filter_abstract_patterns
from .offline import DeadlockReport, check_abstract_pattern, spd_offline
from .online import OnlineEngine, spd_online
from .trace import Trace, enumerate_patterns_bruteforce, load_trace, parse_trace, serialize, validate
from .vclock import compute_timestamps, join, leq

__all__ = [
    "ClosureState",
    "DeadlockReport",
    "OnlineEngine",
    "Trace",
    "build_graph",
    "check_abstract_pattern",
    "comp_sp_closure",
    "compute_abstract_acquires",
    "compute_timestamps",
    "enumerate_cycles",
    "enumerate_patterns_bruteforce",
    "filter_abstract_patterns",
    "is_sp_deadlock",
    "join",
    "leq",
    "load_trace",
    "parse_trace",
    "prev_set",
    "serialize",
    "spd_offline",
    "spd_online",
    "validate",
]
