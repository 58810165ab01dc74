from __future__ import annotations

import random

import pytest

from conftest import corpus_trace, fixture_trace
from spdpredict.closure import ClosureState, comp_sp_closure, is_sp_deadlock, prev_set
from spdpredict.gen import gen_random_trace
from spdpredict.oracle import check_witness, naive_sp_closure
from spdpredict.trace import NotAPattern, enumerate_patterns_bruteforce, parse_trace, validate
from spdpredict.vclock import compute_timestamps, join, zero


def ids(*one_based):
    return {e - 1 for e in one_based}


def closure_of(tr, seed_events):
    ts = compute_timestamps(tr)
    state = ClosureState(tr, ts)
    return set(ts.members(comp_sp_closure(state, ts.of_set(seed_events))))


def test_prev_set():
    s2, s3 = fixture_trace("sigma2"), fixture_trace("sigma3")
    assert prev_set(s2, ids(4, 18)) == ids(3, 17)
    assert prev_set(s3, ids(2, 16)) == ids(1, 15)
    assert prev_set(s2, ids(1)) == set()


# known closure sets for sigma2 and sigma3 (1-based event numbers)
GOLDEN = [
    ("sigma2", (4, 18), ids(1, 2, 3, 8, 9, *range(12, 18))),
    ("sigma3", (2, 16), ids(*range(1, 7), *range(8, 16))),
    ("sigma3", (29, 16), ids(*range(1, 16), 28)),
    ("sigma3", (29, 19), ids(*range(1, 19), 28)),
]


@pytest.mark.parametrize("name,pattern,expected", GOLDEN)
def test_closure_of_pattern_predecessors(name, pattern, expected):
    tr = fixture_trace(name)
    assert closure_of(tr, prev_set(tr, ids(*pattern))) == expected


def test_closure_of_plain_set():
    tr = fixture_trace("sigma3")
    assert closure_of(tr, ids(1, 15)) == ids(*range(1, 7), *range(8, 16))


def test_zero_clock_is_closed():
    tr = fixture_trace("sigma2")
    ts = compute_timestamps(tr)
    assert comp_sp_closure(ClosureState(tr, ts), zero(ts.width)) == zero(ts.width)


@pytest.mark.parametrize(
    "name,pattern,expected",
    [
        ("sigma2", (4, 18), True),
        ("sigma3", (2, 16), False),
        ("sigma3", (29, 16), True),
        ("sigma3", (29, 19), True),
        ("sigma1", (2, 8), False),
    ],
)
def test_is_sp_deadlock(name, pattern, expected):
    tr = fixture_trace(name)
    chk = is_sp_deadlock(tr, compute_timestamps(tr), [e - 1 for e in pattern])
    assert chk.is_deadlock is expected
    if expected:
        assert check_witness(tr, chk.witness, [e - 1 for e in pattern], sync_preserving=True)
    else:
        assert chk.witness is None


def test_not_a_pattern():
    tr = fixture_trace("sigma2")
    with pytest.raises(NotAPattern):
        is_sp_deadlock(tr, compute_timestamps(tr), [0, 2])


def test_trace_ending_with_held_lock():
    # the last critical section on L is never closed; nothing needs its release
    tr = validate(parse_trace("T2|acq(L)\nT2|rel(L)\nT1|acq(L)\nT1|w(x)\nT2|r(x)\nT2|w(y)"))
    ts = compute_timestamps(tr)
    state = ClosureState(tr, ts)
    assert set(ts.members(comp_sp_closure(state, ts[5]))) == {0, 1, 2, 3, 4, 5}
    assert not state.infeasible


def _random_seed_set(rng, tr):
    n = len(tr)
    return set(rng.sample(range(n), rng.randint(0, min(4, n)))) if n else set()


@pytest.mark.parametrize("seed", range(150))
def test_closure_matches_naive_fixpoint(seed):
    rng = random.Random(seed)
    locks = rng.randint(1, 4)
    tr = gen_random_trace(
        rng.randint(2, 4), locks, rng.randint(0, 2), rng.randint(1, 25), min(2, locks), seed, forks=seed % 5 == 0
    )
    for _ in range(5):
        S = _random_seed_set(rng, tr)
        assert closure_of(tr, S) == naive_sp_closure(tr, S)


@pytest.mark.parametrize("seed", range(60))
def test_closure_monotone_and_amortized(seed):
    rng = random.Random(seed)
    tr = gen_random_trace(3, 3, 2, 25, 2, seed)
    ts = compute_timestamps(tr)
    state = ClosureState(tr, ts)
    prev_members: set[int] = set()
    T = zero(ts.width)
    for _ in range(6):
        S = _random_seed_set(rng, tr)
        T = comp_sp_closure(state, join(T, ts.of_set(S)))
        members = set(ts.members(T))
        assert prev_members <= members
        # a single fresh computation on the union agrees with the incremental one
        assert members == naive_sp_closure(tr, prev_members | S)
        prev_members = members
    assert state.pops <= tr.n_acquires


@pytest.mark.parametrize("seed", range(80))
def test_witnesses_are_sync_preserving_reorderings(seed):
    tr = corpus_trace(seed)
    ts = compute_timestamps(tr)
    for k in (2, 3):
        for pat in enumerate_patterns_bruteforce(tr, k):
            chk = is_sp_deadlock(tr, ts, pat)
            if chk.is_deadlock:
                assert check_witness(tr, chk.witness, pat, sync_preserving=True)
