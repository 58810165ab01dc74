"""Command line front end.

Exit codes: 0 no deadlock, 1 deadlock(s) found, 2 input error, 3 a
resource cap was hit (takes precedence over 1).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .bench import bench
from .gen import InfeasibleParams, independent_set_text, ov_text, parse_graph, parse_ov, random_trace_text
from .offline import spd_offline
from .online import OnlineEngine
from .oracle import DEFAULT_MAX_STATES, oracle_predictable_deadlocks, oracle_sp_deadlocks
from .trace import ResourceLimit, TraceError, canonical_pattern, parse_trace, validate

log = logging.getLogger("spdpredict")

EXIT_NONE, EXIT_FOUND, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load(path: str):
    return validate(parse_trace(_read_text(path)))


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.json and args.json != "-":
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(_dumps(payload) + "\n")
    if args.json == "-" or args.format == "json":
        sys.stdout.write(_dumps(payload) + "\n")
    else:
        for line in text_lines:
            print(line)


def _report_line(r) -> str:
    pairs = ", ".join(f"{t}:{l}@{e}" for t, l, e in zip(r.threads, r.locks, r.events))
    s = f"deadlock [{r.kind}] {pairs} (abstract pattern {r.abstract_pattern})"
    if r.locations:
        s += " at " + ", ".join(str(x) for x in r.locations)
    return s


def cmd_analyze(args) -> int:
    if args.mode == "online":
        if args.max_size not in (None, 2):
            log.error("online mode only detects deadlocks of size 2")
            return EXIT_INPUT
        return _analyze_online(args)
    trace = _load(args.path)
    res = spd_offline(
        trace,
        max_len=args.max_size or 4,
        cycle_cap=args.cycle_cap,
        all_instances=args.all_instances,
        parallel=args.parallel,
        witness=args.witness,
    )
    payload = {"stats": res.stats.to_dict(), "reports": [r.to_dict() for r in res.reports]}
    lines = [_report_line(r) for r in res.reports]
    lines.append(f"{len(res.reports)} deadlock(s) in {res.stats.events} events")
    if res.stats.warning:
        lines.append(f"warning: {res.stats.warning}")
    _emit(args, payload, lines)
    if res.stats.cap_exceeded:
        return EXIT_CAP
    return EXIT_FOUND if res.reports else EXIT_NONE


def _analyze_online(args) -> int:
    streaming = args.path == "-"

    def sink(rep):
        if streaming:
            sys.stdout.write(json.dumps(rep.to_dict(), sort_keys=True) + "\n")
            sys.stdout.flush()

    eng = OnlineEngine(sink=sink)
    if streaming:
        for lineno, line in enumerate(sys.stdin, 1):
            eng.feed_line(line, lineno)
        return EXIT_FOUND if eng.reports else EXIT_NONE
    with open(args.path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            eng.feed_line(line, lineno)
    stats = {
        "events": eng.n,
        "threads": len(eng.parser.thread_names),
        "locks": len(eng.parser.lock_names),
        "vars": len(eng.parser.var_names),
        "pops": eng.pops,
    }
    payload = {"stats": stats, "reports": [r.to_dict() for r in eng.reports]}
    lines = [_report_line(r) for r in eng.reports]
    lines.append(f"{len(eng.reports)} deadlock(s) in {eng.n} events")
    _emit(args, payload, lines)
    return EXIT_FOUND if eng.reports else EXIT_NONE


STATS_KEYS = [
    ("N", "events"),
    ("T", "threads"),
    ("V", "vars"),
    ("L", "locks"),
    ("A", "acquires"),
    ("|V_G|", "nodes"),
    ("|E_G|", "edges"),
    ("|Cyc|", "cycles"),
    ("#abstract", "abstract_patterns"),
    ("#concrete", "concrete_patterns"),
]


def cmd_stats(args) -> int:
    trace = _load(args.path)
    st = spd_offline(trace, max_len=args.max_size, cycle_cap=args.cycle_cap).stats
    d = st.to_dict()
    payload = {label: d[key] for label, key in STATS_KEYS}
    _emit(args, payload, [f"{label:>10}  {d[key]}" for label, key in STATS_KEYS])
    return EXIT_CAP if st.cap_exceeded else EXIT_NONE


def cmd_verify(args) -> int:
    trace = _load(args.path)
    limits = {"max_states": args.max_states, "max_events": args.max_events}
    res = spd_offline(trace, max_len=args.k, all_instances=True)
    detected = {canonical_pattern(r.events) for r in res.reports if len(r.events) == args.k}
    sp = {canonical_pattern(p) for p in oracle_sp_deadlocks(trace, args.k, **limits)}
    pred = {canonical_pattern(p) for p in oracle_predictable_deadlocks(trace, args.k, **limits)}
    diff = {
        "detector": sorted(detected),
        "oracle_sync_preserving": sorted(sp),
        "oracle_predictable": sorted(pred),
        "missed": sorted(sp - detected),
        "spurious": sorted(detected - sp),
        "predictable_not_sync_preserving": sorted(pred - sp),
    }
    payload = {k: [list(p) for p in v] for k, v in diff.items()}
    _emit(args, payload, [f"{k}: {' '.join(str(list(p)) for p in v) or '-'}" for k, v in diff.items()])
    return EXIT_FOUND if diff["missed"] or diff["spurious"] else EXIT_NONE


def _write_out(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_gen(args) -> int:
    if args.kind == "random":
        seed = args.seed if args.seed is not None else int(os.environ.get("SPD_SEED", "0"))
        text = random_trace_text(
            args.threads, args.locks, args.vars, args.length, args.nesting, seed, forks=args.forks
        )
    elif args.kind == "indset":
        text = independent_set_text(parse_graph(_read_text(args.input)), args.c)
    else:
        text = ov_text(parse_ov(_read_text(args.input)))
    _write_out(args.output, text)
    return EXIT_NONE


def cmd_bench(args) -> int:
    factors = [int(x) for x in args.factors.split(",")]
    modes = ("offline", "online") if args.mode == "both" else (args.mode,)
    rows = bench(_read_text(args.path), factors, modes, args.repeat)
    base = {r.mode: r.seconds for r in rows if r.factor == factors[0]}
    for r in rows:
        ratio = r.seconds / base[r.mode] if base[r.mode] else float("nan")
        print(
            f"{r.mode:>8} x{r.factor:<3} N={r.events:<7} A={r.acquires:<6} "
            f"{r.seconds * 1e3:9.3f} ms  ratio {ratio:6.2f}  max pops {r.max_pops}"
        )
    return EXIT_NONE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spdpredict", description="Sync-preserving deadlock prediction.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def output_flags(sp):
        sp.add_argument("--json", metavar="PATH", help="also write JSON to PATH ('-' for stdout)")
        sp.add_argument("--format", choices=("text", "json"), default="text")

    a = sub.add_parser("analyze", help="detect deadlocks in a trace")
    a.add_argument("path", help="trace file, or '-' for stdin")
    a.add_argument("--mode", choices=("offline", "online"), default="offline")
    a.add_argument("--max-size", type=int, default=None, help="largest pattern size (default 4, online 2)")
    a.add_argument("--cycle-cap", type=int, default=10_000)
    a.add_argument("--all-instances", action="store_true", help="check every instantiation (slow)")
    a.add_argument("--parallel", nargs="?", type=int, const=True, default=False, metavar="N")
    a.add_argument("--witness", action="store_true", help="include witness reorderings")
    output_flags(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("stats", help="trace and lock-graph statistics")
    s.add_argument("path")
    s.add_argument("--max-size", type=int, default=4)
    s.add_argument("--cycle-cap", type=int, default=10_000)
    output_flags(s)
    s.set_defaults(func=cmd_stats)

    v = sub.add_parser("verify", help="compare the detector with the exhaustive oracle")
    v.add_argument("path")
    v.add_argument("-k", type=int, default=2)
    v.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    v.add_argument("--max-events", type=int, default=25)
    output_flags(v)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate traces")
    gsub = g.add_subparsers(dest="kind", required=True)
    r = gsub.add_parser("random")
    r.add_argument("--threads", type=int, default=3)
    r.add_argument("--locks", type=int, default=3)
    r.add_argument("--vars", type=int, default=2)
    r.add_argument("--length", type=int, default=20)
    r.add_argument("--nesting", type=int, default=2)
    r.add_argument("--seed", type=int, default=None, help="default: $SPD_SEED or 0")
    r.add_argument("--forks", action="store_true")
    i = gsub.add_parser("indset", help="independent-set reduction from an edge list")
    i.add_argument("input")
    i.add_argument("-c", type=int, required=True)
    o = gsub.add_parser("ov", help="orthogonal-vectors reduction from A/B rows")
    o.add_argument("input")
    for sp in (r, i, o):
        sp.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="time analysis on replicated copies of a trace")
    b.add_argument("path")
    b.add_argument("--factors", default="1,2,4,8")
    b.add_argument("--mode", choices=("offline", "online", "both"), default="both")
    b.add_argument("--repeat", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ResourceLimit as exc:
        log.error("%s", exc)
        return EXIT_CAP
    except (OSError, TraceError, InfeasibleParams, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
