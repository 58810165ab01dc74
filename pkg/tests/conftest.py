from __future__ import annotations

import random
from pathlib import Path

import pytest

from spdpredict.gen import gen_random_trace
from spdpredict.trace import load_trace

FIXTURES = Path(__file__).parent / "fixtures"
NAMED = ("sigma1", "sigma2", "sigma3", "c1", "c2")


def fixture_trace(name: str):
    return load_trace(FIXTURES / f"{name}.trace")


def corpus_params(seed: int) -> dict:
    """Random-trace parameters for the shared differential corpus."""
    rng = random.Random(seed)
    return dict(
        threads=rng.randint(2, 3),
        locks=rng.randint(2, 4),
        vars=rng.randint(0, 2),
        length=rng.randint(8, 20),
        nesting=2,
        seed=seed,
        forks=seed % 7 == 0,
    )


def corpus_trace(seed: int):
    return gen_random_trace(**corpus_params(seed))


@pytest.fixture
def fx():
    return fixture_trace


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
