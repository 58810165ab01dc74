"""One test per acceptance criterion; each prints a PASS/FAIL line with its numbers."""

from __future__ import annotations

import random
import time
from itertools import product

import networkx as nx

from conftest import ACCEPTANCE_LINES, NAMED, FIXTURES, corpus_trace, fixture_trace
from spdpredict.bench import bench, replicate
from spdpredict.cli import main
from spdpredict.closure import ClosureState, comp_sp_closure, prev_set
from spdpredict.gen import OVInstance, UGraph, gen_independent_set_trace, gen_ov_trace, gen_random_trace
from spdpredict.offline import spd_offline
from spdpredict.online import first_reports, spd_online
from spdpredict.oracle import oracle_predictable_deadlocks, oracle_sp_deadlocks
from spdpredict.trace import has_pattern, parse_trace, serialize, validate
from spdpredict.vclock import compute_timestamps, leq
from test_gen import has_independent_set, has_orthogonal
from test_vclock import _closure_leq

# pinned tolerances
FIXTURE_SECONDS = 1.0
CORPUS_SIZE = 2000
REDUCTION_SECONDS = 60.0
SCALING_FACTORS = (1, 2, 4, 8)
SCALING_MAX_RATIO = 3 * 8
BENCH_REPEAT = 7
TS_TRACES = 500
TS_MAX_EVENTS = 25


def record(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def ids(*one_based):
    return {e - 1 for e in one_based}


def pairs(reports):
    return {tuple(r.events) for r in reports}


def test_criterion_01_named_fixtures():
    problems = []
    times = {}
    for name, kwargs, want in [
        ("sigma1", {}, set()),
        ("sigma2", {}, {(3, 17)}),
        ("sigma3", {}, {(15, 28)}),
        ("sigma3", {"all_instances": True}, {(15, 28), (18, 28)}),
    ]:
        t0 = time.perf_counter()
        res = spd_offline(fixture_trace(name), **kwargs)
        dt = time.perf_counter() - t0
        times[name] = max(times.get(name, 0.0), dt)
        if pairs(res.reports) != want:
            problems.append(f"{name} {kwargs}: {sorted(pairs(res.reports))}")
        if name == "sigma3" and not kwargs:
            st = res.stats
            got = (st.nodes, st.cycles, st.abstract_patterns, st.concrete_patterns, st.closures)
            if got != (4, 1, 1, 6, [2]):
                problems.append(f"sigma3 stats {got}")
    slow = {k: v for k, v in times.items() if v >= FIXTURE_SECONDS}
    ok = not problems and not slow
    worst = max(times.values())
    record(1, ok, f"named fixtures exact, 2 closures on sigma3, slowest {worst:.3f}s < {FIXTURE_SECONDS}s" + (f" {problems}" if problems else ""))


def test_criterion_02_closure_golden():
    s2, s3 = fixture_trace("sigma2"), fixture_trace("sigma3")
    cases = [
        (s2, prev_set(s2, ids(4, 18)), ids(1, 2, 3, 8, 9, *range(12, 18))),
        (s3, prev_set(s3, ids(2, 16)), ids(*range(1, 7), *range(8, 16))),
        (s3, ids(1, 15), ids(*range(1, 7), *range(8, 16))),
        (s3, prev_set(s3, ids(29, 16)), ids(*range(1, 16), 28)),
        (s3, prev_set(s3, ids(29, 19)), ids(*range(1, 19), 28)),
    ]
    bad = 0
    for tr, seed, want in cases:
        ts = compute_timestamps(tr)
        got = ts.members(comp_sp_closure(ClosureState(tr, ts), ts.of_set(seed)))
        bad += set(got) != want
    record(2, bad == 0, f"{len(cases) - bad}/{len(cases)} closure sets exact")


def test_criterion_03_incomparability():
    c1, c2 = fixture_trace("c1"), fixture_trace("c2")
    r1 = pairs(spd_offline(c1).reports)
    sp = pairs(spd_offline(c2, max_len=2, all_instances=True).reports)
    pred = oracle_predictable_deadlocks(c2, 2)
    osp = oracle_sp_deadlocks(c2, 2)
    ok = r1 == {(3, 13)} and sp == osp == {(1, 5)} and pred == {(1, 5), (1, 7)} and pred - sp == {(1, 7)}
    record(3, ok, f"C1 {sorted(r1)}, C2 sp {sorted(sp)}, predictable {sorted(pred)}, diff {sorted(pred - sp)}")


def test_criterion_04_oracle_equivalence():
    mismatches = 0
    reports = 0
    for seed in range(CORPUS_SIZE):
        tr = corpus_trace(seed)
        got = pairs(spd_offline(tr, max_len=3, all_instances=True).reports)
        want = oracle_sp_deadlocks(tr, 2) | oracle_sp_deadlocks(tr, 3)
        mismatches += got != want
        reports += len(got)
    record(4, mismatches == 0, f"{CORPUS_SIZE} traces, {reports} reports, {mismatches} mismatches")


def test_criterion_05_offline_online():
    traces = [fixture_trace(n) for n in NAMED] + [corpus_trace(s) for s in range(CORPUS_SIZE)]
    mismatches = 0
    for tr in traces:
        off = pairs(spd_offline(tr, max_len=2).reports)
        on = pairs(first_reports(spd_online(tr).reports))
        mismatches += off != on
    record(5, mismatches == 0, f"{len(traces)} traces, first online report per pattern vs offline, {mismatches} mismatches")


def test_criterion_06_soundness():
    checked = false_pos = 0
    for seed in range(CORPUS_SIZE):
        tr = corpus_trace(seed)
        got = pairs(spd_offline(tr, max_len=3, all_instances=True).reports) | pairs(spd_online(tr).reports)
        if not got:
            continue
        pred = oracle_predictable_deadlocks(tr, 2) | oracle_predictable_deadlocks(tr, 3)
        checked += len(got)
        false_pos += len(got - pred)
    record(6, false_pos == 0, f"{checked} reports checked, {false_pos} not predictable")


def test_criterion_07_reductions():
    t0 = time.perf_counter()
    rng = random.Random(7)
    is_bad = is_n = 0
    for G in nx.graph_atlas_g()[1:]:
        verts = list(range(1, G.number_of_nodes() + 1))
        labelings = [verts] + [rng.sample(verts, len(verts)) for _ in range(2)]
        for lab in labelings:
            g = UGraph(len(verts), tuple((lab[u], lab[v]) for u, v in G.edges()))
            for c in (2, 3):
                is_n += 1
                is_bad += has_pattern(gen_independent_set_trace(g, c), c) != has_independent_set(g, c)
    ov_bad = ov_n = 0
    for d in range(1, 5):
        vecs = list(product((0, 1), repeat=d))
        for n in range(1, 6):
            for _ in range(60):
                inst = OVInstance(tuple(rng.choices(vecs, k=n)), tuple(rng.choices(vecs, k=n)))
                ov_n += 1
                ov_bad += has_pattern(gen_ov_trace(inst), 2) != has_orthogonal(inst)
    dt = time.perf_counter() - t0
    ok = is_bad == 0 and ov_bad == 0 and dt < REDUCTION_SECONDS
    record(7, ok, f"indset {is_n} cases {is_bad} mismatches, OV {ov_n} cases {ov_bad} mismatches, {dt:.1f}s < {REDUCTION_SECONDS:.0f}s")


def test_criterion_08_linear_scaling():
    text = (FIXTURES / "sigma2.trace").read_text()
    rows = bench(text, SCALING_FACTORS, ("offline", "online"), BENCH_REPEAT)
    ratios = {}
    for mode in ("offline", "online"):
        t = {r.factor: r.seconds for r in rows if r.mode == mode}
        ratios[mode] = t[8] / t[1]
    pop_bad = 0
    for m in SCALING_FACTORS:
        tr = validate(parse_trace(replicate(text, m)))
        A = tr.n_acquires
        off = spd_offline(tr)
        pop_bad += any(p > A for p in off.stats.pops)
        eng = spd_online(tr)
        pop_bad += eng.pops > len(eng.views) * A
    ok = all(r <= SCALING_MAX_RATIO for r in ratios.values()) and pop_bad == 0
    record(
        8,
        ok,
        f"8x/1x offline {ratios['offline']:.2f}, online {ratios['online']:.2f} (<= {SCALING_MAX_RATIO}), "
        f"pop bound violations {pop_bad}",
    )


def test_criterion_09_timestamps():
    bad_pairs = 0
    pairs_checked = 0
    for seed in range(TS_TRACES):
        rng = random.Random(seed)
        locks = rng.randint(1, 4)
        n = rng.randint(1, TS_MAX_EVENTS)
        tr = gen_random_trace(rng.randint(1, 4), locks, rng.randint(0, 3), n, min(2, locks), seed, forks=seed % 3 == 0)
        ts = compute_timestamps(tr)
        R = _closure_leq(tr)
        n = len(tr)
        pairs_checked += n * n
        bad_pairs += sum(leq(ts[a], ts[b]) != R[a][b] for a in range(n) for b in range(n))
    record(9, bad_pairs == 0, f"{TS_TRACES} traces, {pairs_checked} ordered pairs, {bad_pairs} mismatches")


def test_criterion_10_determinism(tmp_path, capsys):
    paths = [FIXTURES / f"{n}.trace" for n in NAMED]
    for seed in range(0, 300, 10):
        p = tmp_path / f"r{seed}.trace"
        p.write_text(serialize(corpus_trace(seed)))
        paths.append(p)
    groups = [
        ["--witness"],
        ["--max-size", "3", "--all-instances"],
    ]
    differing = runs = 0
    for p in paths:
        for base in groups:
            outs = set()
            for extra in ([], [], ["--parallel"], ["--parallel", "2"]):
                main(["analyze", str(p), "--json", "-", *base, *extra])
                outs.add(capsys.readouterr().out)
                runs += 1
            differing += len(outs) != 1
        outs = set()
        for _ in range(2):
            main(["analyze", str(p), "--mode", "online", "--json", "-"])
            outs.add(capsys.readouterr().out)
            runs += 1
        differing += len(outs) != 1
    record(10, differing == 0, f"{len(paths)} traces, {runs} runs, {differing} configs with non-identical JSON")
