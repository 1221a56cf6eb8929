"""Explicit-state reference semantics.

Bodies are evaluated exactly on the composed induced DTMC of a concrete
instantiation; :func:`check_by_enumeration` evaluates the whole quantifier
prefix by brute force over finite scheduler and stutter-scheduler domains.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

from .formula import (And, Arith, Atom, Compare, Const, FormulaError, HyperFormula, Next, Node, Not,
                      Prob, QuantKind, TrueF, Until, desugar, experiment_map, experiments_of)
from .linalg import SingularSystem, solve_sparse
from .model import (CountingStutterScheduler, Dtmc, Mdp, MemorylessScheduler, ModelError,
                    all_stutter_schedulers, compose, induce_dtmc)

CMP = {
    "<": operator.lt, "<=": operator.le, "=": operator.eq,
    "!=": operator.ne, ">=": operator.ge, ">": operator.gt,
}
ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}


# ------------------------------------------------------------- DTMC queries

def backward_reachable(d: Dtmc, targets: Set, through: Set) -> Set:
    """States that reach ``targets`` along paths whose other states lie in ``through``."""
    pred: Dict[Hashable, List] = {}
    for s in d.states:
        for t in d.trans[s]:
            pred.setdefault(t, []).append(s)
    seen = set(targets)
    stack = list(targets)
    while stack:
        t = stack.pop()
        for s in pred.get(t, ()):
            if s not in seen and s in through:
                seen.add(s)
                stack.append(s)
    return seen


def until_probabilities(d: Dtmc, phi1: Set, phi2: Set) -> Dict[Hashable, Fraction]:
    """Exact ``Pr(phi1 U phi2)`` for every state of ``d``."""
    phi2 = set(phi2) & set(d.states)
    can = backward_reachable(d, phi2, set(phi1))
    maybe = [s for s in d.states if s in can and s not in phi2]
    result = {s: Fraction(0) for s in d.states}
    for s in phi2:
        result[s] = Fraction(1)
    if maybe:
        mset = set(maybe)
        rows = {}
        rhs = {}
        for s in maybe:
            row = {s: Fraction(1)}
            b = Fraction(0)
            for t, p in d.trans[s].items():
                if t in mset:
                    row[t] = row.get(t, Fraction(0)) - p
                elif t in phi2:
                    b += p
            rows[s] = row
            rhs[s] = b
        try:
            sol = solve_sparse(rows, rhs)
        except SingularSystem as exc:  # pragma: no cover - excluded by the yes/no partition
            raise AssertionError("until system singular after prob0/prob1 partition") from exc
        result.update(sol)
    return result


def until_probability(d: Dtmc, start, phi1_states: Iterable, phi2_states: Iterable) -> Fraction:
    return until_probabilities(d, set(phi1_states), set(phi2_states))[start]


def next_probability(d: Dtmc, start, phi_states: Iterable) -> Fraction:
    target = set(phi_states)
    return sum((p for t, p in d.trans[start].items() if t in target), Fraction(0))


# ------------------------------------------------------- body evaluation

@dataclass(frozen=True)
class Instantiation:
    scheduler: MemorylessScheduler
    start_states: Tuple[str, ...]
    stutterers: Tuple[CountingStutterScheduler, ...]


def _trivial_chain() -> Dtmc:
    return Dtmc(((),), {(): frozenset()}, {(): {(): Fraction(1)}})


class _Evaluator:
    """Evaluates indexed, desugared subformulas on products of experiment chains.

    With ``marginalize`` each subformula is evaluated on the product of only
    the experiments its atoms mention, which is exact because the composed
    chain is a product of independent chains. Without it every subformula
    uses the full n-fold product.
    """

    def __init__(self, mdp: Mdp, chains: Sequence[Dtmc], marginalize: bool = True,
                 tol: Fraction = Fraction(0), ids: Optional[Sequence[Hashable]] = None,
                 cache: Optional[dict] = None):
        self.mdp = mdp
        self.tol = tol
        self.chains = chains
        self.n = len(chains)
        self.marginalize = marginalize
        # ``ids`` name the chains; evaluators sharing a ``cache`` reuse results
        # for equally named sub-products
        self.ids = tuple(ids) if ids is not None else tuple(range(self.n))
        cache = {} if cache is None else cache
        self.products: Dict[Tuple, Dtmc] = cache.setdefault("products", {})
        self.memo: Dict[Tuple, Dict] = cache.setdefault("memo", {})

    def _key(self, exps: Tuple[int, ...]) -> Tuple:
        return tuple(self.ids[i - 1] for i in exps)

    def product(self, exps: Tuple[int, ...]) -> Dtmc:
        key = self._key(exps)
        if key not in self.products:
            if exps:
                self.products[key] = compose([self.chains[i - 1] for i in exps])
            else:
                self.products[key] = _trivial_chain()
        return self.products[key]

    def scope(self, node: Node) -> Tuple[int, ...]:
        if not self.marginalize:
            return tuple(range(1, self.n + 1))
        scopes = self.memo.setdefault("scopes", {})
        got = scopes.get(id(node))
        if got is None or got[0] is not node:
            got = scopes[id(node)] = (node, experiments_of(node))
        return got[1]

    def point(self, node: Node, exps: Tuple[int, ...], state: Tuple):
        """Value of ``node`` at one state of ``product(exps)``.

        Only probability operators need whole-chain maps; the Boolean and
        arithmetic glue above them is evaluated at the single state.
        """
        if isinstance(node, Prob):
            own = self.scope(node)
            return self.value(node, own)[tuple(state[exps.index(i)] for i in own)]
        if isinstance(node, TrueF):
            return True
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Atom):
            return node.ap in self.mdp.labels[state[exps.index(node.var)][0]]
        if isinstance(node, Not):
            return not self.point(node.arg, exps, state)
        if isinstance(node, And):
            return self.point(node.left, exps, state) and self.point(node.right, exps, state)
        if isinstance(node, Compare):
            rel = CMP[node.op] if not self.tol else _tolerant(node.op, self.tol)
            return rel(self.point(node.left, exps, state), self.point(node.right, exps, state))
        if isinstance(node, Arith):
            return ARITH[node.op](self.point(node.left, exps, state), self.point(node.right, exps, state))
        raise FormulaError(f"unexpected node in desugared body: {node!r}")

    def value(self, node: Node, exps: Tuple[int, ...]) -> Dict:
        """Map from states of ``product(exps)`` to the truth/value of ``node``."""
        key = (id(node), exps, self._key(exps))
        if key in self.memo and self.memo[key][0] is node:
            return self.memo[key][1]
        own = self.scope(node)
        if own != exps:
            inner = self.value(node, own)
            pos = [exps.index(i) for i in own]
            d = self.product(exps)
            out = {s: inner[tuple(s[p] for p in pos)] for s in d.states}
        else:
            out = self._compute(node, exps)
        self.memo[key] = (node, out)  # the node reference keeps id() unambiguous
        return out

    def _compute(self, node: Node, exps: Tuple[int, ...]) -> Dict:
        d = self.product(exps)
        if isinstance(node, TrueF):
            return {s: True for s in d.states}
        if isinstance(node, Atom):
            pos = exps.index(node.var)
            return {s: node.ap in self.mdp.labels[s[pos][0]] for s in d.states}
        if isinstance(node, Not):
            v = self.value(node.arg, exps)
            return {s: not v[s] for s in d.states}
        if isinstance(node, And):
            a, b = self.value(node.left, exps), self.value(node.right, exps)
            return {s: a[s] and b[s] for s in d.states}
        if isinstance(node, Compare):
            a, b = self.value(node.left, exps), self.value(node.right, exps)
            rel = CMP[node.op] if not self.tol else _tolerant(node.op, self.tol)
            return {s: rel(a[s], b[s]) for s in d.states}
        if isinstance(node, Const):
            return {s: node.value for s in d.states}
        if isinstance(node, Arith):
            a, b = self.value(node.left, exps), self.value(node.right, exps)
            f = ARITH[node.op]
            return {s: f(a[s], b[s]) for s in d.states}
        if isinstance(node, Prob):
            path = node.path
            if isinstance(path, Next):
                v = self.value(path.arg, exps)
                target = {s for s in d.states if v[s]}
                return {s: next_probability(d, s, target) for s in d.states}
            if isinstance(path, Until):
                v1, v2 = self.value(path.left, exps), self.value(path.right, exps)
                return until_probabilities(d, {s for s in d.states if v1[s]}, {s for s in d.states if v2[s]})
        raise FormulaError(f"unexpected node in desugared body: {node!r}")


def _tolerant(op: str, tol: Fraction):
    return {
        "<": lambda a, b: a < b + tol,
        "<=": lambda a, b: a <= b + tol,
        "=": lambda a, b: abs(a - b) <= tol,
        "!=": lambda a, b: abs(a - b) > tol,
        ">=": lambda a, b: a >= b - tol,
        ">": lambda a, b: a > b - tol,
    }[op]


def experiment_chains(mdp: Mdp, inst: Instantiation, k: Sequence[int]) -> List[Dtmc]:
    return [induce_dtmc(mdp, inst.scheduler, tau, prune_from=[inst.start_states[k[i] - 1]])
            for i, tau in enumerate(inst.stutterers)]


def eval_body(mdp: Mdp, inst: Instantiation, body: Node, k: Optional[Sequence[int]] = None,
              marginalize: bool = True) -> bool:
    """Truth of an indexed body at ``((s_k1, 0), ..., (s_kn, 0))``.

    Sugar is expanded first, so pre- and post-desugar bodies evaluate alike.
    """
    n = len(inst.stutterers)
    if k is None:
        k = tuple(range(1, n + 1))
    if len(k) != n or any(not 1 <= ki <= len(inst.start_states) for ki in k):
        raise ModelError("instantiation inconsistent with the experiment map")
    ev = _Evaluator(mdp, experiment_chains(mdp, inst, k), marginalize)
    return _eval_at_start(ev, inst, desugar(body), k)


def _eval_at_start(ev: _Evaluator, inst: Instantiation, body: Node, k) -> bool:
    exps = tuple(range(1, ev.n + 1))
    start = tuple((inst.start_states[k[i - 1] - 1], 0) for i in exps)
    if not ev.marginalize:
        return bool(ev.value(body, exps)[start])
    return bool(ev.point(body, exps, start))


def eval_body_full(mdp: Mdp, inst: Instantiation, body: Node, k: Optional[Sequence[int]] = None) -> bool:
    """Same as :func:`eval_body` but on the unpruned ``(S x [m])^n`` composition."""
    n = len(inst.stutterers)
    k = tuple(range(1, n + 1)) if k is None else tuple(k)
    chains = [induce_dtmc(mdp, inst.scheduler, tau) for tau in inst.stutterers]
    ev = _Evaluator(mdp, chains, marginalize=False)
    return _eval_at_start(ev, inst, desugar(body), k)


def check_instantiated(mdp: Mdp, f: HyperFormula, scheduler: MemorylessScheduler,
                       stutterers: Sequence[CountingStutterScheduler], tol: Fraction = Fraction(0)) -> bool:
    """Evaluate the state-quantifier prefix with scheduler and stutterers fixed.

    This is what a solver witness certifies: one scheduler and one
    stutter-scheduler per experiment serving every state instantiation.
    """
    em = experiment_map(f)
    body = desugar(em.body)

    def level(i, starts):
        if i == em.l:
            inst = Instantiation(scheduler, starts, tuple(stutterers))
            ev = _Evaluator(mdp, experiment_chains(mdp, inst, em.k), True, tol)
            return _eval_at_start(ev, inst, body, em.k)
        gen = (level(i + 1, starts + (s,)) for s in mdp.states)
        return any(gen) if f.states[i].kind is QuantKind.EXISTS else all(gen)

    return level(0, ())


# ------------------------------------------------------------ enumeration

class SchedulerDomain(Enum):
    SINGLE_ACTION = "single"
    DETERMINISTIC = "deterministic"
    GRID = "grid"


@dataclass
class EnumerationResult:
    holds: Optional[bool]
    conclusive: bool
    scheduler: Optional[MemorylessScheduler] = None  # witness or counterexample scheduler
    evaluations: int = 0
    note: str = ""

    def __bool__(self):
        return bool(self.holds)


def _grid_distributions(A: Tuple[str, ...], step: Fraction):
    steps = int(1 / step)
    if Fraction(1, steps) != step:
        raise ValueError("grid step must be 1/N")
    for combo in itertools.product(range(steps + 1), repeat=len(A) - 1):
        rest = steps - sum(combo)
        if rest < 0:
            continue
        yield {a: Fraction(c, steps) for a, c in zip(A, combo + (rest,))}


def scheduler_domain(mdp: Mdp, policy: SchedulerDomain, step: Fraction = Fraction(1, 4)):
    sets = mdp.action_sets()
    if policy is SchedulerDomain.SINGLE_ACTION:
        if any(len(A) != 1 for A in sets):
            raise ModelError("SINGLE_ACTION policy needs a model with one enabled action per state")
        yield MemorylessScheduler({A: {A[0]: Fraction(1)} for A in sets})
    elif policy is SchedulerDomain.DETERMINISTIC:
        for choice in itertools.product(*sets):
            yield MemorylessScheduler.deterministic(dict(zip(sets, choice)))
    else:
        for dists in itertools.product(*(list(_grid_distributions(A, step)) for A in sets)):
            yield MemorylessScheduler(dict(zip(sets, dists)))


def _exact_domain(mdp: Mdp, policy: SchedulerDomain) -> bool:
    if policy is SchedulerDomain.SINGLE_ACTION:
        return True
    return all(len(A) == 1 for A in mdp.action_sets())


def check_by_enumeration(mdp: Mdp, f: HyperFormula, m: int,
                         policy: SchedulerDomain = SchedulerDomain.SINGLE_ACTION,
                         grid_step: Fraction = Fraction(1, 4), state_cap: int = 10 ** 6,
                         marginalize: bool = True) -> EnumerationResult:
    """Evaluate the full quantifier prefix by finite enumeration.

    State quantifiers range over all states and stutter quantifiers over all
    m-bounded counting stutter-schedulers, each restricted to the states
    reachable from its experiment's start (values elsewhere cannot matter).
    Stutter-schedulers are chosen after the start states, following the
    quantifier order of the formula.

    Only the exhaustive direction of a scheduler enumeration is conclusive
    when the domain is a proper subset of memoryless schedulers: a witness
    for an existential scheduler, a counterexample for a universal one.
    """
    em = experiment_map(f)
    if (len(mdp.states) * m) ** em.n > state_cap:
        raise ModelError(f"(|S|*m)^n = {(len(mdp.states) * m) ** em.n} exceeds the state cap {state_cap}")
    body = desugar(em.body)
    counter = [0]
    reach = {s: mdp.reachable(s) for s in mdp.states}
    taus_for = {}

    def stutter_options(s):
        if s not in taus_for:
            taus_for[s] = list(all_stutter_schedulers(mdp, m, reach[s]))
        return taus_for[s]

    def run(sched: MemorylessScheduler) -> bool:
        chain_cache: Dict[Tuple[str, CountingStutterScheduler], Dtmc] = {}
        value_cache: Dict = {}
        shared: dict = {}

        def chain(s, tau):
            key = (s, tau_key(tau))
            if key not in chain_cache:
                chain_cache[key] = induce_dtmc(mdp, sched, tau, prune_from=[s])
            return chain_cache[key]

        def evaluate(starts, taus):
            counter[0] += 1
            key = (starts, tuple(tau_key(t) for t in taus))
            if key not in value_cache:
                ids = [(starts[em.k[i] - 1], tau_key(t)) for i, t in enumerate(taus)]
                chains = [chain(starts[em.k[i] - 1], t) for i, t in enumerate(taus)]
                ev = _Evaluator(mdp, chains, marginalize, ids=ids, cache=shared)
                inst = Instantiation(sched, starts, tuple(taus))
                value_cache[key] = _eval_at_start(ev, inst, body, em.k)
            return value_cache[key]

        def states_level(i, starts):
            if i == em.l:
                return stutter_level(0, starts, ())
            q = f.states[i]
            gen = (states_level(i + 1, starts + (s,)) for s in mdp.states)
            return any(gen) if q.kind is QuantKind.EXISTS else all(gen)

        def stutter_level(i, starts, taus):
            if i == em.n:
                return evaluate(starts, taus)
            q = f.stutters[i]
            s = starts[em.k[i] - 1]
            gen = (stutter_level(i + 1, starts, taus + (t,)) for t in stutter_options(s))
            return any(gen) if q.kind is QuantKind.EXISTS else all(gen)

        return states_level(0, ())

    exact = _exact_domain(mdp, policy)
    existential = f.sched.kind is QuantKind.EXISTS
    for sched in scheduler_domain(mdp, policy, grid_step):
        verdict = run(sched)
        if verdict == existential:
            return EnumerationResult(verdict, True, sched, counter[0],
                                     "witness" if existential else "counterexample")
    holds = not existential
    note = "" if exact else "scheduler domain not exhaustive; verdict inconclusive"
    return EnumerationResult(holds if exact else None, exact, None, counter[0], note)


def tau_key(tau: CountingStutterScheduler) -> FrozenSet:
    return frozenset((k, v) for k, v in tau.durations.items() if v)
