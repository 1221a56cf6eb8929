"""Seeded generators for small random models and formulas (testing aid)."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import List, Optional, Sequence

from .formula import HyperFormula, parse_formula
from .model import Mdp

# Two-experiment bodies with existential quantifiers throughout. ``{c}`` is
# replaced by a random probability constant. Path formulas stay within one
# experiment except for the joint next-step template; untils over the joint
# product of two experiments are legal but far harder for the solver.
BODY_TEMPLATES = (
    "P(F a(t1)) = P(F a(t2))",
    "P(F a(t1)) = P(F b(t2)) & !(a(t1))",
    "P(X a(t1)) > P(X b(t2))",
    "P(X a(t1)) = P(X a(t2)) & P(F b(t1)) >= {c}",
    "P(a(t1) U b(t1)) >= P(a(t2) U b(t2))",
    "P(G !(a(t1))) >= {c} & b(t2)",
    "P(F a(t1)) = {c} | P(F b(t2)) = {c}",
    "P(!(b(t1)) U a(t1)) = {c} & P(F b(t2)) > P(F a(t2))",
    "P(F a(t1)) + P(F b(t2)) = {c}",
    "P(F a(t1)) * P(F a(t2)) > {c}",
    "P(X (a(t1) | b(t2))) < {c}",
    "P(!(b(t1)) U a(t1)) = P(F a(t2))",
    "P(X P(F b(t1)) > {c}) >= P(X a(t2))",
)

JOINT_TEMPLATES = (
    "P(a(t1) U b(t2)) >= {c}",
    "P(F (a(t1) & b(t2))) > {c}",
)

_CONSTS = (Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4), Fraction(1))


def random_distribution(rng: random.Random, targets: Sequence[str], denominator: int = 4) -> dict:
    """A random rational distribution over a non-empty subset of ``targets``."""
    k = rng.randint(1, min(len(targets), denominator))
    chosen = rng.sample(list(targets), k)
    # split ``denominator`` units into k positive parts
    cuts = sorted(rng.sample(range(1, denominator), k - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [denominator])]
    return {t: Fraction(p, denominator) for t, p in zip(chosen, parts)}


def random_mdp(rng: random.Random, n_states: int, max_actions: int = 1, aps: Sequence[str] = ("a", "b"),
               denominator: int = 4, label_prob: float = 0.4) -> Mdp:
    states = [f"s{i}" for i in range(n_states)]
    actions = [f"x{i}" for i in range(max_actions)]
    labels = {s: [a for a in aps if rng.random() < label_prob] for s in states}
    trans = {}
    for s in states:
        k = rng.randint(1, max_actions)
        for a in rng.sample(actions, k):
            trans[(s, a)] = random_distribution(rng, states, denominator)
    return Mdp.build(states, labels, trans, actions=actions, aps=aps)


def random_formula(rng: random.Random, template: Optional[str] = None) -> HyperFormula:
    body = template or rng.choice(BODY_TEMPLATES)
    while "{c}" in body:
        body = body.replace("{c}", str(rng.choice(_CONSTS)), 1)
    return parse_formula(
        "exists sched sg . exists state s1(sg) . exists state s2(sg) . "
        "exists stutter t1(s1) . exists stutter t2(s2) . " + body)


def random_instances(seed: int, count: int, max_states: int = 4) -> List[tuple]:
    """``count`` reproducible (mdp, formula) pairs of single-action models."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        mdp = random_mdp(rng, rng.randint(2, max_states))
        out.append((mdp, random_formula(rng)))
    return out
