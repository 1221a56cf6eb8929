"""Compile (MDP, formula, memory bound) into a QF_NRA constraint system.

The system is the conjunction of three blocks:

* scheduler/stutter choice: ``sigma_A_a`` probabilities per enabled-action
  set, ``tau_i_s_a`` stutter durations in ``[m]``, and the ``go``/``tr``
  variables describing which ``(s, j) -> (s', j')`` steps the chosen
  durations allow;
* semantics: ``holds``/``prob`` variables for every subformula at every
  composed state ``((s_1, j_1), ..., (s_n, j_n))``;
* truth: the state-quantifier combination over the start states
  ``((s_k1, 0), ..., (s_kn, 0))``.

Integer-valued variables are declared Real and restricted by disjunctions
of equalities, keeping the whole system in QF_NRA.
"""

from __future__ import annotations

import itertools
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .formula import (And, Arith, Atom, Compare, Const, FormulaError, HyperFormula, Next, Node, Not,
                      Prob, QuantKind, TrueF, Until, UnsupportedFragment, desugar, experiment_map,
                      experiments_of, is_desugared, is_existential)
from .model import Mdp, succ_plus

SMT_CMP = {"<": "<", "<=": "<=", "=": "=", "!=": "distinct", ">=": ">=", ">": ">"}

Composed = Tuple[Tuple[str, int], ...]


def smt_num(x) -> str:
    x = Fraction(x)
    if x < 0:
        return f"(- {smt_num(-x)})"
    if x.denominator == 1:
        return f"{x.numerator}.0"
    return f"(/ {x.numerator}.0 {x.denominator}.0)"


def _and(terms: Sequence[str]) -> str:
    terms = list(terms)
    if not terms:
        return "true"
    return terms[0] if len(terms) == 1 else f"(and {' '.join(terms)})"


def _or(terms: Sequence[str]) -> str:
    terms = list(terms)
    if not terms:
        return "false"
    return terms[0] if len(terms) == 1 else f"(or {' '.join(terms)})"


def _mul(factors: Sequence[str]) -> str:
    factors = list(factors)
    if not factors:
        return "1.0"
    return factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})"


def _sum(terms: Sequence[str]) -> str:
    terms = list(terms)
    if not terms:
        return "0.0"
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


@dataclass
class ConstraintSystem:
    """Declared variables plus assertions, renderable as SMT-LIB text."""

    decls: Dict[str, str] = field(default_factory=dict)  # name -> sort
    assertions: List[str] = field(default_factory=list)
    sigma_vars: Dict[Tuple[Tuple[str, ...], str], str] = field(default_factory=dict)
    tau_vars: Dict[Tuple[int, str, str], str] = field(default_factory=dict)
    holds_vars: Dict[Tuple[int, Composed], str] = field(default_factory=dict)
    prob_vars: Dict[Tuple[int, Composed], str] = field(default_factory=dict)
    subformulas: Dict[int, Node] = field(default_factory=dict)
    scopes: Dict[int, Tuple[int, ...]] = field(default_factory=dict)
    body_id: Optional[int] = None
    m: int = 1
    n: int = 0
    encode_seconds: float = 0.0

    def declare(self, name: str, sort: str = "Real") -> str:
        if name in self.decls:
            raise ValueError(f"duplicate declaration {name}")
        self.decls[name] = sort
        return name

    def add(self, term: str) -> None:
        self.assertions.append(term)

    @property
    def stats(self) -> Dict[str, object]:
        return {
            "variables": len(self.decls),
            "assertions": len(self.assertions),
            "subformulas": len(self.subformulas),
            "encode_time": round(self.encode_seconds, 4),
        }

    def holds_count(self, node_id: int) -> int:
        return sum(1 for (i, _) in self.holds_vars if i == node_id)

    def node_id(self, node: Node) -> int:
        for i, nd in self.subformulas.items():
            if nd == node:
                return i
        raise KeyError(node)

    def to_smtlib(self, get_values: Sequence[str] = (), decimal_values: bool = True,
                  check_sat: bool = True) -> str:
        out = ["(set-option :produce-models true)", "(set-logic QF_NRA)"]
        for name, sort in self.decls.items():
            out.append(f"(declare-fun {name} () {sort})")
        for a in self.assertions:
            out.append(f"(assert {a})")
        if not check_sat:
            out.append("(exit)")
            return "\n".join(out) + "\n"
        out.append("(check-sat)")
        if get_values:
            names = " ".join(get_values)
            out.append(f"(get-value ({names}))")
            if decimal_values:
                out.append("(set-option :pp.decimal true)")
                out.append("(set-option :pp.decimal_precision 40)")
                out.append(f"(get-value ({names}))")
        out.append("(exit)")
        return "\n".join(out) + "\n"


_SIMPLE = re.compile(r"[A-Za-z0-9]+\Z")


class Encoder:
    """Builds a :class:`ConstraintSystem`; see :func:`encode`."""

    def __init__(self, mdp: Mdp, n: int, m: int, relevant_only: bool = True, guarded: bool = True):
        if m < 1:
            raise ValueError("memory bound m must be >= 1")
        self.mdp = mdp
        self.n = n
        self.m = m
        self.relevant_only = relevant_only
        self.guarded = guarded
        self.cs = ConstraintSystem(m=m, n=n)
        self.splus = [(s, j) for s in mdp.states for j in range(m)]
        self._sym: Dict[str, str] = {}
        for prefix, ids in (("s", mdp.states), ("a", mdp.actions)):
            for idx, x in enumerate(ids):
                self._sym[(prefix, x)] = x if _SIMPLE.match(x) else f"{prefix}{idx}x"
        self.go: Dict[Tuple[int, Tuple[str, int], str, Tuple[str, int]], Tuple[str, str]] = {}
        self._ids: Dict[Node, int] = {}
        self._hint: Dict[Tuple[int, Composed], str] = {}
        self._until_rank: Dict[Tuple[int, Composed], str] = {}

    def ss(self, s: str) -> str:
        return self._sym[("s", s)]

    def sa(self, a: str) -> str:
        return self._sym[("a", a)]

    def tup_name(self, t: Composed) -> str:
        return "_".join(f"{self.ss(s)}_{j}" for s, j in t) or "e"

    # ---------------------------------------------------------- choices
    def encode_scheduler_choice(self) -> None:
        cs = self.cs
        for A in self.mdp.action_sets():
            aname = "_".join(self.sa(a) for a in A)
            names = []
            for a in A:
                v = cs.declare(f"sigma_{aname}_{self.sa(a)}")
                cs.sigma_vars[(A, a)] = v
                cs.add(f"(<= 0.0 {v})")
                cs.add(f"(<= {v} 1.0)")
                names.append(v)
            cs.add(f"(= {_sum(names)} 1.0)")

    def encode_stutter_choice(self) -> None:
        cs = self.cs
        for i in range(1, self.n + 1):
            for s in self.mdp.states:
                for a in self.mdp.enabled_actions(s):
                    v = cs.declare(f"tau_{i}_{self.ss(s)}_{self.sa(a)}")
                    cs.tau_vars[(i, s, a)] = v
                    cs.add(_or([f"(= {v} {smt_num(j)})" for j in range(self.m)]))

    def encode_go_tr(self) -> None:
        cs = self.cs
        for i in range(1, self.n + 1):
            for (s, j) in self.splus:
                for a in self.mdp.enabled_actions(s):
                    tau = cs.tau_vars[(i, s, a)]
                    for (t, jt) in succ_plus(s, j, a, self.m, self.mdp):
                        suffix = f"{i}_{self.ss(s)}_{j}_{self.sa(a)}_{self.ss(t)}_{jt}"
                        go = cs.declare(f"go_{suffix}")
                        tr = cs.declare(f"tr_{suffix}")
                        self.go[(i, (s, j), a, (t, jt))] = (go, tr)
                        # go is 1 exactly when the step is allowed; the ite form keeps
                        # go in {0, 1} and lets the solver substitute it away
                        if jt == j + 1 and t == s:
                            cs.add(f"(= {go} (ite (< {smt_num(j)} {tau}) 1.0 0.0))")
                            cs.add(f"(= {tr} 1.0)")
                        else:
                            cs.add(f"(= {go} (ite (>= {smt_num(j)} {tau}) 1.0 0.0))")
                            cs.add(f"(= {tr} {smt_num(self.mdp.prob(s, a, t))})")

    # -------------------------------------------------------- semantics
    def scope(self, node: Node) -> Tuple[int, ...]:
        return experiments_of(node) if self.relevant_only else tuple(range(1, self.n + 1))

    def tuples(self, scope: Tuple[int, ...]):
        return itertools.product(self.splus, repeat=len(scope))

    @staticmethod
    def project(t: Composed, scope: Tuple[int, ...], sub: Tuple[int, ...]) -> Composed:
        return tuple(t[scope.index(i)] for i in sub)

    def var_of(self, node: Node, t: Composed, scope: Tuple[int, ...]) -> str:
        """Variable of an already-encoded ``node`` at the projection of ``t``."""
        nid = self._ids[node]
        sub = self.cs.scopes[nid]
        key = (nid, self.project(t, scope, sub))
        return self.cs.holds_vars[key] if key in self.cs.holds_vars else self.cs.prob_vars[key]

    def moves(self, t: Composed, scope: Tuple[int, ...]):
        """Yield ``(successor tuple, [(sigma, go, tr) per experiment])`` over joint actions."""
        per_exp = []
        for pos, i in enumerate(scope):
            s, j = t[pos]
            opts = []
            A = self.mdp.enabled_actions(s)
            for a in A:
                sigma = self.cs.sigma_vars[(A, a)]
                for succ in succ_plus(s, j, a, self.m, self.mdp):
                    go, tr = self.go[(i, (s, j), a, succ)]
                    opts.append((succ, (sigma, go, tr)))
            per_exp.append(opts)
        for combo in itertools.product(*per_exp):
            yield tuple(c[0] for c in combo), [c[1] for c in combo]

    def encode_semantics(self, node: Node) -> int:
        if node in self._ids:
            return self._ids[node]
        for c in _sem_children(node):
            self.encode_semantics(c)
        nid = len(self.cs.subformulas)
        self._ids[node] = nid
        self.cs.subformulas[nid] = node
        scope = self.scope(node)
        self.cs.scopes[nid] = scope
        cs = self.cs
        boolean = not isinstance(node, (Prob, Const, Arith))
        for t in self.tuples(scope):
            if boolean:
                v = cs.declare(f"holds_{self.tup_name(t)}_{nid}", "Bool")
                cs.holds_vars[(nid, t)] = v
            else:
                v = cs.declare(f"prob_{self.tup_name(t)}_{nid}")
                cs.prob_vars[(nid, t)] = v
        for t in self.tuples(scope):
            self._encode_at(node, nid, t, scope)
        return nid

    def holds_int(self, node: Node, t: Composed) -> str:
        nid = self._ids[node]
        key = (nid, t)
        if key not in self._hint:
            h = self.cs.holds_vars[key]
            v = self.cs.declare(f"holdsInt_{self.tup_name(t)}_{nid}")
            self._hint[key] = v
            self.cs.add(f"(= {v} (ite {h} 1.0 0.0))")
        return self._hint[key]

    def _encode_at(self, node: Node, nid: int, t: Composed, scope: Tuple[int, ...]) -> None:
        cs = self.cs
        if isinstance(node, TrueF):
            cs.add(cs.holds_vars[(nid, t)])
        elif isinstance(node, Atom):
            s = t[scope.index(node.var)][0]
            h = cs.holds_vars[(nid, t)]
            cs.add(h if node.ap in self.mdp.labels[s] else f"(not {h})")
        elif isinstance(node, And):
            h = cs.holds_vars[(nid, t)]
            cs.add(f"(= {h} (and {self.var_of(node.left, t, scope)} {self.var_of(node.right, t, scope)}))")
        elif isinstance(node, Not):
            cs.add(f"(xor {cs.holds_vars[(nid, t)]} {self.var_of(node.arg, t, scope)})")
        elif isinstance(node, Compare):
            h = cs.holds_vars[(nid, t)]
            rel = f"({SMT_CMP[node.op]} {self.var_of(node.left, t, scope)} {self.var_of(node.right, t, scope)})"
            cs.add(f"(= {h} {rel})")
        elif isinstance(node, Const):
            cs.add(f"(= {cs.prob_vars[(nid, t)]} {smt_num(node.value)})")
        elif isinstance(node, Arith):
            p = cs.prob_vars[(nid, t)]
            cs.add(f"(= {p} ({node.op} {self.var_of(node.left, t, scope)} {self.var_of(node.right, t, scope)}))")
        elif isinstance(node, Prob) and isinstance(node.path, Next):
            self._encode_next(node, nid, t, scope)
        elif isinstance(node, Prob) and isinstance(node.path, Until):
            self._encode_until(node, nid, t, scope)
        else:
            raise FormulaError(f"unexpected constructor in desugared body: {node!r}")

    def _step_term(self, factors, tail: str) -> str:
        """``prod_i (sigma_i * go_i * tr_i) * tail`` for one joint move.

        With ``guarded`` the 0/1 factors ``go_i`` become an ``ite`` guard, which
        is the same value (go is pinned to {0, 1}) but leaves the solver a
        linear term once the stutter durations are decided.
        """
        if not self.guarded:
            return _mul([x for f in factors for x in f] + [tail])
        guard = _and([f"(= {go} 1.0)" for _, go, _ in factors])
        value = _mul([x for sigma, _, tr in factors for x in (sigma, tr)] + [tail])
        return f"(ite {guard} {value} 0.0)"

    def _enabled(self, factors) -> str:
        """``prod_i (sigma_i * go_i) > 0``."""
        if not self.guarded:
            return f"(> {_mul([x for f in factors for x in f[:2]])} 0.0)"
        return _and([f"(= {go} 1.0)" for _, go, _ in factors] + [f"(> {sigma} 0.0)" for sigma, _, _ in factors])

    def _encode_next(self, node: Prob, nid: int, t: Composed, scope) -> None:
        arg = node.path.arg
        sub = self.cs.scopes[self._ids[arg]]
        terms = []
        for succ, factors in self.moves(t, scope):
            hint = self.holds_int(arg, self.project(succ, scope, sub))
            terms.append(self._step_term(factors, hint))
        self.cs.add(f"(= {self.cs.prob_vars[(nid, t)]} {_sum(terms)})")

    def _encode_until(self, node: Prob, nid: int, t: Composed, scope) -> None:
        cs = self.cs
        left, right = node.path.left, node.path.right
        p = cs.prob_vars[(nid, t)]
        h1 = self.var_of(left, t, scope)
        h2 = self.var_of(right, t, scope)
        d = self._rank(nid, t)
        # without these bounds a phi1-class that cannot reach phi2 admits any
        # non-positive constant; with them the ranking forces the least solution
        cs.add(f"(<= 0.0 {p})")
        cs.add(f"(<= {p} 1.0)")
        cs.add(f"(=> {h2} (= {p} 1.0))")
        cs.add(f"(=> (and (not {h1}) (not {h2})) (= {p} 0.0))")
        terms = []
        rank = []
        for succ, factors in self.moves(t, scope):
            terms.append(self._step_term(factors, cs.prob_vars[(nid, succ)]))
            progress = f"(or {self.var_of(right, succ, scope)} (> {d} {self._rank(nid, succ)}))"
            rank.append(f"(and {self._enabled(factors)} {progress})")
        middle = f"(and (= {p} {_sum(terms)}) (=> (> {p} 0.0) {_or(rank)}))"
        cs.add(f"(=> (and {h1} (not {h2})) {middle})")

    def _rank(self, nid: int, t: Composed) -> str:
        key = (nid, t)
        if key not in self._until_rank:
            self._until_rank[key] = self.cs.declare(f"d_{self.tup_name(t)}_{nid}")
        return self._until_rank[key]

    # ------------------------------------------------------------ truth
    def encode_truth(self, f: HyperFormula, body: Node) -> None:
        em = experiment_map(f)
        nid = self._ids[body]
        scope = self.cs.scopes[nid]

        def level(i: int, starts: Tuple[str, ...]) -> str:
            if i == em.l:
                t = tuple((starts[em.k[e - 1] - 1], 0) for e in scope)
                return self.cs.holds_vars[(nid, t)]
            terms = [level(i + 1, starts + (s,)) for s in self.mdp.states]
            return _and(terms) if f.states[i].kind is QuantKind.FORALL else _or(terms)

        self.cs.add(level(0, ()))


def _sem_children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, Not):
        return (node.arg,)
    if isinstance(node, (And, Compare, Arith)):
        return (node.left, node.right)
    if isinstance(node, Prob):
        path = node.path
        return (path.arg,) if isinstance(path, Next) else (path.left, path.right)
    return ()


def encode(mdp: Mdp, f: HyperFormula, m: int, relevant_only: bool = True,
           guarded: bool = True) -> ConstraintSystem:
    """Encode an existential-prefix formula (scheduler and stutter quantifiers ``exists``).

    Purely universal formulas must be dualized first
    (:func:`ahmc.formula.negate_prefix`); the solver front end does this.
    """
    if not is_existential(f):
        raise UnsupportedFragment("encoding needs existential scheduler and stutter quantifiers")
    t0 = time.perf_counter()
    em = experiment_map(f)
    body = desugar(em.body)
    enc = Encoder(mdp, em.n, m, relevant_only, guarded)
    enc.encode_scheduler_choice()
    enc.encode_stutter_choice()
    enc.encode_go_tr()
    enc.encode_semantics(body)
    enc.cs.body_id = enc._ids[body]
    enc.encode_truth(f, body)
    enc.cs.encode_seconds = time.perf_counter() - t0
    return enc.cs


def encode_body(mdp: Mdp, body: Node, n: int, m: int, relevant_only: bool = True,
                guarded: bool = True) -> Encoder:
    """Choice and semantics blocks for an indexed body, without the truth block."""
    body = desugar(body)
    if not is_desugared(body):
        raise FormulaError("desugaring failed")
    enc = Encoder(mdp, n, m, relevant_only, guarded)
    enc.encode_scheduler_choice()
    enc.encode_stutter_choice()
    enc.encode_go_tr()
    enc.encode_semantics(body)
    enc.cs.body_id = enc._ids[body]
    return enc
