"""MDPs, DTMCs, restricted schedulers and counting stutter-schedulers.

Probabilities are :class:`fractions.Fraction` throughout so that the explicit
oracle and the SMT encoding agree without float drift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

State = str
Action = str
ComposedState = Tuple[Tuple[State, int], ...]


class ModelError(ValueError):
    """Malformed model, scheduler or stutter-scheduler."""


def to_fraction(value) -> Fraction:
    """Parse ``value`` as an exact rational.

    Strings may be decimals (``0.25``) or ``p/q`` rationals; floats are
    converted through their shortest repr so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"not a probability: {value!r}") from exc
    return Fraction(value)


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP with labeled states and action-indexed distributions.

    ``trans`` maps ``(state, action)`` to a ``{successor: probability}``
    dict holding only the positive entries. Missing ``(state, action)``
    keys are disabled actions.
    """

    states: Tuple[State, ...]
    actions: Tuple[Action, ...]
    labels: Mapping[State, FrozenSet[str]]
    trans: Mapping[Tuple[State, Action], Mapping[State, Fraction]]
    aps: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if not self.aps:
            aps = frozenset().union(*self.labels.values()) if self.labels else frozenset()
            object.__setattr__(self, "aps", aps)
        index = {s: i for i, s in enumerate(self.states)}
        object.__setattr__(self, "_index", index)
        enabled = {}
        for s in self.states:
            enabled[s] = tuple(
                a for a in self.actions if sum(self.trans.get((s, a), {}).values(), Fraction(0)) == 1
            )
        object.__setattr__(self, "_enabled", enabled)

    @classmethod
    def build(cls, states: Sequence[State], labels: Mapping[State, Iterable[str]],
              trans: Mapping[Tuple[State, Action], Mapping[State, object]],
              actions: Optional[Sequence[Action]] = None, aps: Iterable[str] = ()) -> "Mdp":
        """Convenience constructor accepting plain iterables and numeric probabilities."""
        if actions is None:
            seen: Dict[Action, None] = {}
            for (_, a) in trans:
                seen.setdefault(a, None)
            actions = list(seen)
        norm = {}
        for key, dist in trans.items():
            row = {t: to_fraction(p) for t, p in dist.items()}
            norm[key] = {t: p for t, p in row.items() if p != 0}
        lab = {s: frozenset(labels.get(s, ())) for s in states}
        return cls(tuple(states), tuple(actions), lab, norm, frozenset(aps))

    def enabled_actions(self, s: State) -> Tuple[Action, ...]:
        try:
            return self._enabled[s]
        except KeyError:
            raise ModelError(f"unknown state {s!r}") from None

    def prob(self, s: State, a: Action, t: State) -> Fraction:
        return self.trans.get((s, a), {}).get(t, Fraction(0))

    def successors(self, s: State, a: Action) -> Dict[State, Fraction]:
        return dict(self.trans.get((s, a), {}))

    def index(self, s: State) -> int:
        return self._index[s]

    def action_sets(self) -> List[Tuple[Action, ...]]:
        """Distinct enabled-action sets, in order of first occurrence."""
        out: Dict[Tuple[Action, ...], None] = {}
        for s in self.states:
            out.setdefault(self.enabled_actions(s), None)
        return list(out)

    def num_transitions(self) -> int:
        """Number of positive ``(s, a, s')`` entries."""
        return sum(len(d) for d in self.trans.values())

    def reachable(self, start: State) -> List[State]:
        seen = {start}
        stack = [start]
        order = [start]
        while stack:
            s = stack.pop()
            for a in self.enabled_actions(s):
                for t in self.trans[(s, a)]:
                    if t not in seen:
                        seen.add(t)
                        order.append(t)
                        stack.append(t)
        return order

    def is_single_action(self) -> bool:
        return all(len(self.enabled_actions(s)) == 1 for s in self.states)


def validate_mdp(mdp: Mdp) -> List[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems = []
    declared = set(mdp.states)
    if len(declared) != len(mdp.states):
        problems.append("duplicate state ids")
    for s in mdp.states:
        for ap in mdp.labels.get(s, ()):
            if mdp.aps and ap not in mdp.aps:
                problems.append(f"state {s}: label {ap!r} is not a declared atomic proposition")
    bad_rows = set()
    for (s, a), dist in mdp.trans.items():
        if s not in declared:
            problems.append(f"({s}, {a}): unknown source state")
            continue
        if a not in mdp.actions:
            problems.append(f"({s}, {a}): undeclared action")
        for t, p in dist.items():
            if t not in declared:
                problems.append(f"({s}, {a}): unknown successor {t!r}")
            if p < 0 or p > 1:
                problems.append(f"({s}, {a}): probability {p} of {t} outside [0,1]")
        total = sum(dist.values(), Fraction(0))
        if total not in (0, 1):
            bad_rows.add(s)
            problems.append(f"({s}, {a}): probabilities sum to {total}, expected 1")
    for s in mdp.states:
        if not mdp.enabled_actions(s) and s not in bad_rows:
            problems.append(f"state {s}: no enabled action")
    return problems


def enabled_actions(mdp: Mdp, s: State) -> Tuple[Action, ...]:
    return mdp.enabled_actions(s)


@dataclass(frozen=True, eq=False)
class Dtmc:
    """Finite DTMC; ``trans[s]`` holds the positive successors of ``s``."""

    states: Tuple[Hashable, ...]
    labels: Mapping[Hashable, FrozenSet[str]]
    trans: Mapping[Hashable, Mapping[Hashable, Fraction]]
    aps: FrozenSet[str] = frozenset()

    def prob(self, s, t) -> Fraction:
        return self.trans.get(s, {}).get(t, Fraction(0))

    def row_sums(self) -> Dict[Hashable, Fraction]:
        return {s: sum(self.trans.get(s, {}).values(), Fraction(0)) for s in self.states}


@dataclass(frozen=True)
class MemorylessScheduler:
    """Probabilistic memoryless scheduler keyed by enabled-action set.

    States sharing an enabled-action set get the same distribution by
    construction.
    """

    dist: Mapping[Tuple[Action, ...], Mapping[Action, Fraction]]

    def __post_init__(self):
        for A, d in self.dist.items():
            if sum(d.values(), Fraction(0)) != 1:
                raise ModelError(f"scheduler distribution for {A} does not sum to 1")
            for a, p in d.items():
                if p < 0:
                    raise ModelError(f"negative probability for {a} in {A}")
                if p > 0 and a not in A:
                    raise ModelError(f"action {a} has positive probability but is not in {A}")

    @classmethod
    def uniform(cls, mdp: Mdp) -> "MemorylessScheduler":
        return cls({A: {a: Fraction(1, len(A)) for a in A} for A in mdp.action_sets()})

    @classmethod
    def deterministic(cls, choice: Mapping[Tuple[Action, ...], Action]) -> "MemorylessScheduler":
        return cls({A: {a: Fraction(int(a == choice[A])) for a in A} for A in choice})

    def probability(self, A: Tuple[Action, ...], a: Action) -> Fraction:
        try:
            return to_fraction(self.dist[A].get(a, 0))
        except KeyError:
            raise ModelError(f"scheduler has no distribution for action set {A}") from None


@dataclass(frozen=True)
class CountingStutterScheduler:
    """m-bounded counting stutter-scheduler.

    ``durations[(s, a)]`` is the number of stutter steps taken in ``s``
    before ``a`` is executed; missing entries default to 0.
    """

    m: int
    durations: Mapping[Tuple[State, Action], int] = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise ModelError("memory bound m must be >= 1")
        for key, j in self.durations.items():
            if not 0 <= j < self.m:
                raise ModelError(f"stutter duration {j} for {key} outside [0, {self.m})")

    def duration(self, s: State, a: Action) -> int:
        return self.durations.get((s, a), 0)

    @classmethod
    def zero(cls, m: int = 1) -> "CountingStutterScheduler":
        return cls(m, {})


def all_stutter_schedulers(mdp: Mdp, m: int, states: Optional[Iterable[State]] = None):
    """Yield every counting stutter-scheduler (restricted to ``states`` if given)."""
    pairs = [(s, a) for s in (states if states is not None else mdp.states)
             for a in mdp.enabled_actions(s)]
    for values in itertools.product(range(m), repeat=len(pairs)):
        yield CountingStutterScheduler(m, {p: v for p, v in zip(pairs, values) if v})


def succ_plus(s: State, j: int, a: Action, m: int, mdp: Mdp) -> List[Tuple[State, int]]:
    """Successors of ``(s, j)`` under ``a`` for *some* counting stutter-scheduler."""
    if not 0 <= j < m:
        raise ModelError(f"mode {j} outside [0, {m})")
    if a not in mdp.enabled_actions(s):
        raise ModelError(f"action {a} not enabled in {s}")
    out = []
    if j < m - 1:
        out.append((s, j + 1))
    out.extend((t, 0) for t in mdp.trans[(s, a)])
    return out


def _step(mdp, sched, tau, s, j):
    """Distribution of the induced chain from ``(s, j)``."""
    row: Dict[Tuple[State, int], Fraction] = {}
    A = mdp.enabled_actions(s)
    for a in A:
        pa = sched.probability(A, a)
        if pa == 0:
            continue
        if j < tau.duration(s, a):
            key = (s, j + 1)
            row[key] = row.get(key, Fraction(0)) + pa
        else:
            for t, p in mdp.trans[(s, a)].items():
                key = (t, 0)
                row[key] = row.get(key, Fraction(0)) + pa * p
    return row


def induce_dtmc(mdp: Mdp, sched: MemorylessScheduler, tau: CountingStutterScheduler,
                prune_from: Optional[Iterable[State]] = None) -> Dtmc:
    """DTMC induced by a memoryless scheduler and a counting stutter-scheduler.

    States are ``(s, j)`` pairs with ``j`` the number of stutter steps taken
    since the last executed action. The full ``S x [m]`` space is kept
    unless ``prune_from`` lists start states, in which case only states
    reachable from ``(s, 0)`` for those starts are built.
    """
    for s in mdp.states:
        for a in mdp.enabled_actions(s):
            if tau.duration(s, a) >= tau.m:
                raise ModelError(f"stutter duration for ({s}, {a}) out of range")
        sched.probability(mdp.enabled_actions(s), mdp.enabled_actions(s)[0])

    if prune_from is None:
        states = [(s, j) for s in mdp.states for j in range(tau.m)]
        trans = {st: _step(mdp, sched, tau, *st) for st in states}
    else:
        trans = {}
        stack = [(s, 0) for s in prune_from]
        states = []
        while stack:
            st = stack.pop()
            if st in trans:
                continue
            trans[st] = _step(mdp, sched, tau, *st)
            states.append(st)
            stack.extend(t for t in trans[st] if t not in trans)
    labels = {st: mdp.labels.get(st[0], frozenset()) for st in states}
    return Dtmc(tuple(states), labels, trans, frozenset(mdp.aps))


def index_ap(ap: str, i: int) -> str:
    return f"{ap}_{i}"


def compose(dtmcs: Sequence[Dtmc]) -> Dtmc:
    """Synchronous product with atomic propositions indexed by position (1-based)."""
    if not dtmcs:
        raise ModelError("compose needs at least one DTMC")
    states = list(itertools.product(*(d.states for d in dtmcs)))
    trans = {}
    labels = {}
    for st in states:
        row: Dict[tuple, Fraction] = {(): Fraction(1)}
        for d, s in zip(dtmcs, st):
            row = {prefix + (t,): p * q for prefix, p in row.items() for t, q in d.trans[s].items()}
        trans[st] = row
        labels[st] = frozenset(index_ap(a, i + 1) for i, s in enumerate(st) for a in dtmcs[i].labels[s])
    aps = frozenset(index_ap(a, i + 1) for i, d in enumerate(dtmcs) for a in d.aps)
    return Dtmc(tuple(states), labels, trans, aps)


# ---------------------------------------------------------------- text format

def parse_mdp(text: str, strict: bool = True) -> Mdp:
    """Parse the line-based MDP format.

    ::

        mdp
        actions a b
        state s0 init
        action s0 a : s1 1/2, s2 0.5

    The optional ``actions`` line fixes the action order (and declares
    actions no state enables); otherwise actions are ordered by first use.
    With ``strict=False`` rows that do not sum to 1 and references to
    undeclared states are kept, so :func:`validate_mdp` can report them.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines or lines[0][1] != "mdp":
        raise ModelError("line 1: expected header 'mdp'")
    states: List[State] = []
    labels: Dict[State, FrozenSet[str]] = {}
    actions: Dict[Action, None] = {}
    trans: Dict[Tuple[State, Action], Dict[State, Fraction]] = {}
    for lineno, line in lines[1:]:
        kw, _, rest = line.partition(" ")
        if kw == "state":
            parts = rest.split()
            if not parts:
                raise ModelError(f"line {lineno}: missing state id")
            s = parts[0]
            if s in labels:
                raise ModelError(f"line {lineno}: duplicate state {s!r}")
            states.append(s)
            labels[s] = frozenset(parts[1:])
        elif kw == "actions":
            for a in rest.split():
                actions.setdefault(a, None)
        elif kw == "action":
            head, sep, body = rest.partition(":")
            hparts = head.split()
            if not sep or len(hparts) != 2:
                raise ModelError(f"line {lineno}: expected 'action <state> <action> : <succ> <prob>, ...'")
            s, a = hparts
            if (s, a) in trans:
                raise ModelError(f"line {lineno}: duplicate action {a!r} for state {s!r}")
            row: Dict[State, Fraction] = {}
            for item in body.split(","):
                parts = item.split()
                if len(parts) != 2:
                    raise ModelError(f"line {lineno}: bad successor entry {item.strip()!r}")
                t, p = parts
                row[t] = row.get(t, Fraction(0)) + to_fraction(p)
            if strict and sum(row.values(), Fraction(0)) != 1:
                raise ModelError(f"line {lineno}: probabilities for ({s}, {a}) do not sum to 1")
            actions.setdefault(a, None)
            trans[(s, a)] = {t: p for t, p in row.items() if p != 0}
        else:
            raise ModelError(f"line {lineno}: unknown directive {kw!r}")
    for (s, a), row in trans.items():
        for t in [s, *row]:
            if strict and t not in labels:
                raise ModelError(f"action ({s}, {a}) references undeclared state {t!r}")
    return Mdp(tuple(states), tuple(actions), labels, trans)


def _fmt_prob(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def format_mdp(mdp: Mdp) -> str:
    out = ["mdp", " ".join(["actions", *mdp.actions])]
    for s in mdp.states:
        out.append(" ".join(["state", s, *sorted(mdp.labels.get(s, ()))]))
    for s in mdp.states:
        for a in mdp.actions:
            row = mdp.trans.get((s, a))
            if row:
                succ = ", ".join(f"{t} {_fmt_prob(p)}" for t, p in row.items())
                out.append(f"action {s} {a} : {succ}")
    return "\n".join(out) + "\n"
