"""Shared models for the test suite."""

import shutil
from fractions import Fraction

import pytest

from ahmc.model import CountingStutterScheduler, Mdp, MemorylessScheduler


def choice_mdp() -> Mdp:
    """The four-state illustration: s0 chooses alpha (to s1/s2) or beta (to s3).

    s1 carries ``a``, s3 carries ``end``; s1..s3 loop on ``loop``.
    """
    return Mdp.build(
        ["s0", "s1", "s2", "s3"],
        {"s1": ["a"], "s3": ["end"]},
        {
            ("s0", "alpha"): {"s1": Fraction(1, 2), "s2": Fraction(1, 2)},
            ("s0", "beta"): {"s3": 1},
            ("s1", "loop"): {"s1": 1},
            ("s2", "loop"): {"s2": 1},
            ("s3", "loop"): {"s3": 1},
        },
    )


def choice_scheduler(p) -> MemorylessScheduler:
    p = Fraction(p)
    return MemorylessScheduler({("alpha", "beta"): {"alpha": p, "beta": 1 - p}, ("loop",): {"loop": Fraction(1)}})


def choice_stutter() -> CountingStutterScheduler:
    return CountingStutterScheduler(3, {("s0", "alpha"): 2})


def two_state_chain(label_s1=("a",)) -> Mdp:
    """s0 -> {s0: 1/2, s1: 1/2}, s1 absorbing."""
    return Mdp.build(
        ["s0", "s1"],
        {"s1": list(label_s1)},
        {("s0", "go"): {"s0": Fraction(1, 2), "s1": Fraction(1, 2)}, ("s1", "go"): {"s1": 1}},
    )


@pytest.fixture
def choice():
    return choice_mdp()


requires_z3 = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 binary not on PATH")


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
