"""Case-study models: the classic two-thread example (CE), the modular
exponentiation timing leak (TL) and the semaphore output leak (ACDB).

Each generator builds an interleaving MDP with one action per runnable
thread; the scheduler picks which thread steps. Terminated configurations
loop on a dedicated ``done`` action.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from .formula import HyperFormula, parse_formula
from .model import Mdp, format_mdp

log = logging.getLogger(__name__)

# state/transition counts reported for the original case studies
TARGET_SIZES = {
    ("CE", (0, 1)): (7, 9),
    ("CE", (0, 2)): (9, 12),
    ("TL", (1,)): (15, 23),
    ("ACDB", ()): (24, 36),
}


@dataclass(frozen=True)
class CaseStudyFixture:
    name: str
    params: Tuple[int, ...]
    mdp: Mdp
    formula_text: str

    @property
    def formula(self) -> HyperFormula:
        return parse_formula(self.formula_text)

    def size(self) -> Tuple[int, int]:
        return len(self.mdp.states), self.mdp.num_transitions()

    def check_size(self) -> bool:
        """Compare against the published model size; logs a warning on mismatch."""
        target = TARGET_SIZES.get((self.name, self.params))
        if target is None:
            return True
        if self.size() != target:
            log.warning("%s%s: %d states / %d transitions, published %d / %d",
                        self.name, self.params, *self.size(), *target)
            return False
        return True

    def write(self, out_dir: str) -> Tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        model_path = os.path.join(out_dir, "model.mdp")
        formula_path = os.path.join(out_dir, "formula.txt")
        with open(model_path, "w") as fh:
            fh.write(format_mdp(self.mdp))
        with open(formula_path, "w") as fh:
            fh.write(self.formula_text + "\n")
        return model_path, formula_path


class _Builder:
    def __init__(self):
        self.states: List[str] = []
        self.labels: Dict[str, List[str]] = {}
        self.trans: Dict[Tuple[str, str], Dict[str, Fraction]] = {}

    def state(self, name: str, *labels: str) -> str:
        if name not in self.labels:
            self.states.append(name)
            self.labels[name] = list(labels)
        else:
            for a in labels:
                if a not in self.labels[name]:
                    self.labels[name].append(a)
        return name

    def move(self, s: str, action: str, t: str, p=1) -> None:
        row = self.trans.setdefault((s, action), {})
        row[t] = row.get(t, Fraction(0)) + Fraction(p)

    def build(self, actions) -> Mdp:
        return Mdp.build(self.states, self.labels, self.trans, actions=actions)


def _sspod_prefix() -> str:
    return ("exists sched sg . forall state s1(sg) . forall state s2(sg) . "
            "exists stutter t1(s1) . exists stutter t2(s2) . ")


def build_ce(h1: int, h2: int) -> CaseStudyFixture:
    """``th: while h>0 do h--; l:=2  ||  th': l:=1`` for two secret values.

    Configurations are ``(h, th running?, th' running?)``. Only the
    initial configurations carry ``init`` and ``h<v>``; terminal
    configurations carry the final output ``l1``/``l2``.
    """
    if h1 == h2:
        raise ValueError("CE needs two different secret values")
    b = _Builder()
    acts = ("th", "thp", "done")

    def both(h):
        return f"h{h}both"

    def only_th(h):  # th' already wrote l=1
        return f"h{h}th"

    after_th = b.state("thdone")  # th wrote l=2 and terminated, th' pending
    end_l1 = b.state("endl1", "l1")
    end_l2 = b.state("endl2", "l2")

    def add(h, initial):
        s = b.state(both(h), *(["init", f"h{h}"] if initial else []))
        if s in (k[0] for k in b.trans):
            return
        c = b.state(only_th(h))
        if h > 0:
            add(h - 1, h - 1 in (h1, h2))
            b.move(s, "th", both(h - 1))
            b.move(c, "th", only_th(h - 1))
        else:
            b.move(s, "th", after_th)
            b.move(c, "th", end_l2)
        b.move(s, "thp", c)

    for h in sorted((h1, h2), reverse=True):
        add(h, True)
    b.move(after_th, "thp", end_l1)
    b.move(end_l1, "done", end_l1)
    b.move(end_l2, "done", end_l2)
    mdp = b.build(acts)

    lo, hi = f"h{h1}", f"h{h2}"
    premise = f"((({lo}(t1) & {hi}(t2)) | ({hi}(t1) & {lo}(t2))) & init(t1) & init(t2))"
    goal = "(P(F l1(t1)) = P(F l1(t2)) & P(F l2(t1)) = P(F l2(t2)))"
    fx = CaseStudyFixture("CE", (h1, h2), mdp, _sspod_prefix() + f"{premise} -> {goal}")
    fx.check_size()
    return fx


def build_tl(k: int = 1, only_l0: bool = False) -> CaseStudyFixture:
    """Timing leak of modular exponentiation against a counting thread.

    Thread ``t`` runs ``mexp`` over ``k`` key bits. Every bit costs one step
    (shift and square); a 1-bit costs two more (increment and multiply).
    The observer thread increments ``j`` up to ``2k`` while ``t`` has not
    stopped. Initial states carry ``init`` and ``h<key>``; every state
    carries the observer value ``j<l>``. Once ``t`` stops, the
    configurations only differ in ``j`` and are shared between keys.
    """
    if k < 1:
        raise ValueError("key length must be >= 1")
    jmax = 2 * k
    b = _Builder()
    acts = ("mexp", "count", "done")
    keys = ["".join(str((v >> i) & 1) for i in reversed(range(k))) for v in range(2 ** k)]

    def name(key, pc, j):
        return f"stop_j{j}" if pc is None else f"k{key}_p{pc}_j{j}"

    for key in keys:
        steps = sum(3 if bit == "1" else 1 for bit in key)
        for pc in range(steps):
            nxt = pc + 1 if pc + 1 < steps else None
            for j in range(jmax + 1):
                labels = [f"j{j}"]
                if pc == 0 and j == 0:
                    labels += ["init", f"h{key}"]
                s = b.state(name(key, pc, j), *labels)
                b.move(s, "mexp", b.state(name(key, nxt, j), f"j{j}"))
                if j < jmax:
                    b.move(s, "count", b.state(name(key, pc, j + 1), f"j{j + 1}"))
    for j in range(jmax + 1):
        s = name(None, None, j)
        b.move(s, "done", s)
    mdp = b.build(acts)

    secrets = [f"h{key}" for key in keys]
    diff = " | ".join(f"({a}(t1) & {c}(t2))" for a in secrets for c in secrets if a != c)
    premise = f"(({diff}) & init(t1) & init(t2))"
    ls = [0] if only_l0 else range(jmax + 1)
    goal = " & ".join(f"P(F j{l}(t1)) = P(F j{l}(t2))" for l in ls)
    fx = CaseStudyFixture("TL", (k,), mdp, _sspod_prefix() + f"{premise} -> ({goal})")
    fx.check_size()
    return fx


def build_acdb() -> CaseStudyFixture:
    """Two threads printing ``a``/``b`` (T1) and ``c``/``d`` (T2) around a semaphore.

    T1 has two atomic steps: acquire and print ``a``, then increment, print
    ``b`` and release. T2 prints ``c``, then evaluates ``if h=1`` (with
    ``h = 1`` it must acquire the semaphore and busy-waits while T1 holds
    it), then prints ``d``. An output label holds in the configurations
    right after the printing step of its thread.
    """
    b = _Builder()
    acts = ("t1", "t2", "done")
    t1_label = {1: "a", 2: "b"}
    t2_label = {1: "c", 3: "d"}

    def nm(h, p1, p2):
        return f"h{h}_{p1}{p2}"

    for h in (0, 1):
        for p1 in range(3):
            for p2 in range(4):
                labels = [x for x in (t1_label.get(p1), t2_label.get(p2)) if x]
                if p1 == 0 and p2 == 0:
                    labels += ["init", f"h{h}"]
                b.state(nm(h, p1, p2), *labels)
        for p1 in range(3):
            for p2 in range(4):
                s = nm(h, p1, p2)
                if p1 < 2:
                    b.move(s, "t1", nm(h, p1 + 1, p2))
                if p2 < 3:
                    waits = h == 1 and p2 == 1 and p1 == 1
                    b.move(s, "t2", s if waits else nm(h, p1, p2 + 1))
                if p1 == 2 and p2 == 3:
                    b.move(s, "done", s)
    mdp = b.build(acts)
    obs = ("a", "b", "c", "d")
    inner = " & ".join(f"P(X {a}(t1)) = P(X {a}(t2))" for a in obs)
    premise = "(((h0(t1) & h1(t2)) | (h1(t1) & h0(t2))) & init(t1) & init(t2))"
    fx = CaseStudyFixture("ACDB", (), mdp, _sspod_prefix() + f"{premise} -> (P(G ({inner})) = 1)")
    fx.check_size()
    return fx


def build(name: str, *params: int, **options) -> CaseStudyFixture:
    name = name.upper()
    if name == "CE":
        return build_ce(*(params or (0, 1)))
    if name == "TL":
        return build_tl(*(params or (1,)), **options)
    if name == "ACDB":
        return build_acdb()
    raise ValueError(f"unknown case study {name!r}")
