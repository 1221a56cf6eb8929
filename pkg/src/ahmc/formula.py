"""AHyperPCTL formulas: AST, parser, printer, desugaring and prefix analysis.

Concrete syntax::

    exists sched sg . forall state s1(sg) . exists stutter t1(s1) . <body>

Body precedence from loosest to tightest: ``->``, ``|``, ``&``, ``!``; all
binary connectives associate to the left. Probability expressions use
``+``/``-`` below ``*``. Inside ``P(...)`` a path formula is ``X f``,
``F f``, ``G f`` or ``f U g`` where the operands are unary-level formulas
(atoms, negations or parenthesised formulas), so ``U`` binds tighter than
every Boolean connective.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple, Union


class FormulaError(ValueError):
    """Syntax or well-formedness error."""


class UnsupportedFragment(FormulaError):
    """Formula is well-formed but outside what the checker handles."""


class QuantKind(Enum):
    FORALL = "forall"
    EXISTS = "exists"

    def flip(self) -> "QuantKind":
        return QuantKind.EXISTS if self is QuantKind.FORALL else QuantKind.FORALL


# ------------------------------------------------------------------ AST nodes

@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Atom:
    ap: str
    var: Union[str, int]  # stutter variable name, or 1-based experiment index


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Compare:
    op: str  # one of < <= = != >= >
    left: "ProbExpr"
    right: "ProbExpr"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"


@dataclass(frozen=True)
class Globally:
    arg: "Formula"


@dataclass(frozen=True)
class Prob:
    path: "PathFormula"


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Arith:
    op: str  # + - *
    left: "ProbExpr"
    right: "ProbExpr"


Formula = Union[TrueF, FalseF, Atom, Not, And, Or, Implies, Compare]
PathFormula = Union[Next, Until, Eventually, Globally]
ProbExpr = Union[Prob, Const, Arith]
Node = Union[Formula, PathFormula, ProbExpr]

COMPARISONS = ("<=", "<", "=", "!=", ">=", ">")


@dataclass(frozen=True)
class SchedQuant:
    kind: QuantKind
    var: str


@dataclass(frozen=True)
class StateQuant:
    kind: QuantKind
    var: str
    sched: str


@dataclass(frozen=True)
class StutterQuant:
    kind: QuantKind
    var: str
    state: str


@dataclass(frozen=True)
class HyperFormula:
    sched: SchedQuant
    states: Tuple[StateQuant, ...]
    stutters: Tuple[StutterQuant, ...]
    body: Formula

    def __str__(self) -> str:
        return to_text(self)


def children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, (Not, Next, Eventually, Globally)):
        return (node.arg,)
    if isinstance(node, (And, Or, Implies, Until)):
        return (node.left, node.right)
    if isinstance(node, (Compare, Arith)):
        return (node.left, node.right)
    if isinstance(node, Prob):
        return (node.path,)
    return ()


def walk(node: Node) -> Iterator[Node]:
    yield node
    for c in children(node):
        yield from walk(c)


# -------------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+/\d+|\d+(?:\.\d*)?|\.\d+)
  | (?P<op>->|<=|>=|!=|[<>=!&|()+\-*.])
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

KEYWORDS = {"exists", "forall", "sched", "state", "stutter", "true", "false", "P", "X", "F", "G", "U"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaError(f"line {line}, column {pos - line_start + 1}: unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rfind("\n") + 1
        else:
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    # helpers
    def peek(self, offset=0) -> _Tok:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[_Tok] = None) -> FormulaError:
        tok = tok or self.peek()
        found = tok.text or "end of input"
        return FormulaError(f"line {tok.line}, column {tok.col}: {msg} (found {found!r})")

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind != "num":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if not self.accept(text):
            raise self.error(f"expected {text!r}")
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "id" or tok.text in KEYWORDS:
            raise self.error("expected identifier")
        self.i += 1
        return tok.text

    # prefix
    def hyper(self) -> HyperFormula:
        quants = []
        while self.peek().text in ("exists", "forall"):
            kind = QuantKind(self.peek().text)
            self.i += 1
            sort_tok = self.peek()
            if sort_tok.text not in ("sched", "state", "stutter"):
                raise self.error("expected 'sched', 'state' or 'stutter'")
            self.i += 1
            var = self.ident()
            dep = None
            if sort_tok.text != "sched":
                self.expect("(")
                dep = self.ident()
                self.expect(")")
            self.expect(".")
            quants.append((sort_tok, kind, var, dep))
        body = self.formula()
        if self.peek().kind != "eof":
            raise self.error("unexpected trailing input")
        return _assemble(quants, body)

    # Boolean layer
    def formula(self) -> Formula:
        left = self.disj()
        while self.accept("->"):
            left = Implies(left, self.disj())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.accept("|"):
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.accept("&"):
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.accept("!"):
            return Not(self.unary())
        tok = self.peek()
        if tok.text == "true" and tok.kind == "id":
            self.i += 1
            return TrueF()
        if tok.text == "false" and tok.kind == "id":
            self.i += 1
            return FalseF()
        if tok.kind == "id" and tok.text not in KEYWORDS and self.peek(1).text == "(":
            ap = self.ident()
            self.expect("(")
            var = self.ident()
            self.expect(")")
            return Atom(ap, var)
        # comparison of probability expressions, else parenthesised formula
        start = self.i
        try:
            left = self.pexpr()
            op = self.peek().text
            if op not in COMPARISONS or self.peek().kind != "op":
                raise self.error("expected comparison operator")
            self.i += 1
            return Compare(op, left, self.pexpr())
        except FormulaError as exc:
            first_err = exc
            self.i = start
        if self.accept("("):
            inner = self.formula()
            self.expect(")")
            return inner
        raise first_err

    # probability expressions
    def pexpr(self) -> ProbExpr:
        left = self.pterm()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.peek().text
            self.i += 1
            left = Arith(op, left, self.pterm())
        return left

    def pterm(self) -> ProbExpr:
        left = self.pfactor()
        while self.accept("*"):
            left = Arith("*", left, self.pfactor())
        return left

    def pfactor(self) -> ProbExpr:
        tok = self.peek()
        if tok.kind == "num":
            self.i += 1
            return Const(Fraction(tok.text))
        if tok.kind == "id" and tok.text == "P":
            self.i += 1
            self.expect("(")
            path = self.path()
            self.expect(")")
            return Prob(path)
        if self.accept("("):
            inner = self.pexpr()
            self.expect(")")
            return inner
        raise self.error("expected probability expression")

    def path(self) -> PathFormula:
        tok = self.peek()
        if tok.kind == "id" and tok.text in ("X", "F", "G"):
            self.i += 1
            arg = self.unary()
            return {"X": Next, "F": Eventually, "G": Globally}[tok.text](arg)
        left = self.unary()
        tok = self.peek()
        if not (tok.kind == "id" and tok.text == "U"):
            raise self.error("expected 'U' in path formula")
        self.i += 1
        return Until(left, self.unary())


def _assemble(quants, body) -> HyperFormula:
    sched = []
    states: List[StateQuant] = []
    stutters: List[StutterQuant] = []
    seen: Dict[str, _Tok] = {}
    stage = 0
    order = {"sched": 0, "state": 1, "stutter": 2}
    for tok, kind, var, dep in quants:
        where = f"line {tok.line}, column {tok.col}"
        if var in seen:
            raise FormulaError(f"{where}: duplicate variable {var!r}")
        seen[var] = tok
        if order[tok.text] < stage:
            raise FormulaError(f"{where}: {tok.text} quantifier must precede the later quantifier kinds")
        stage = order[tok.text]
        if tok.text == "sched":
            sched.append(SchedQuant(kind, var))
        elif tok.text == "state":
            if dep not in {q.var for q in sched}:
                raise FormulaError(f"{where}: state variable {var!r} depends on unbound scheduler {dep!r}")
            states.append(StateQuant(kind, var, dep))
        else:
            if dep not in {q.var for q in states}:
                raise FormulaError(f"{where}: stutter variable {var!r} depends on unbound state variable {dep!r}")
            stutters.append(StutterQuant(kind, var, dep))
    if not sched:
        raise FormulaError("missing scheduler quantifier")
    if len(sched) > 1:
        raise UnsupportedFragment("only one scheduler quantifier is supported")
    if not states:
        raise FormulaError("missing state quantifier")
    if not stutters:
        raise FormulaError("missing stutter quantifier")
    bound = {q.var for q in stutters}
    for node in walk(body):
        if isinstance(node, Atom) and node.var not in bound:
            raise FormulaError(f"atom {node.ap}({node.var}) refers to unbound stutter variable {node.var!r}")
    return HyperFormula(sched[0], tuple(states), tuple(stutters), body)


def parse_formula(text: str) -> HyperFormula:
    """Parse a quantified formula; sugar is kept as written."""
    return _Parser(text).hyper()


def parse_body(text: str) -> Formula:
    """Parse a non-quantified formula (no scope checks)."""
    p = _Parser(text)
    body = p.formula()
    if p.peek().kind != "eof":
        raise p.error("unexpected trailing input")
    return body


# ------------------------------------------------------------------ printer

def _fmt_const(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def node_text(node: Node) -> str:
    """Fully parenthesised text; parses back to the same AST."""
    if isinstance(node, TrueF):
        return "true"
    if isinstance(node, FalseF):
        return "false"
    if isinstance(node, Atom):
        return f"{node.ap}({node.var})"
    if isinstance(node, Not):
        return f"!{node_text(node.arg)}"
    if isinstance(node, (And, Or, Implies)):
        op = {And: "&", Or: "|", Implies: "->"}[type(node)]
        return f"({node_text(node.left)} {op} {node_text(node.right)})"
    if isinstance(node, Compare):
        return f"({node_text(node.left)} {node.op} {node_text(node.right)})"
    if isinstance(node, Prob):
        return f"P({node_text(node.path)})"
    if isinstance(node, Next):
        return f"X {node_text(node.arg)}"
    if isinstance(node, Eventually):
        return f"F {node_text(node.arg)}"
    if isinstance(node, Globally):
        return f"G {node_text(node.arg)}"
    if isinstance(node, Until):
        return f"{node_text(node.left)} U {node_text(node.right)}"
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Arith):
        return f"({node_text(node.left)} {node.op} {node_text(node.right)})"
    raise TypeError(f"not a formula node: {node!r}")


def to_text(f: HyperFormula) -> str:
    parts = [f"{f.sched.kind.value} sched {f.sched.var} ."]
    parts += [f"{q.kind.value} state {q.var}({q.sched}) ." for q in f.states]
    parts += [f"{q.kind.value} stutter {q.var}({q.state}) ." for q in f.stutters]
    parts.append(node_text(f.body))
    return " ".join(parts)


# ----------------------------------------------------------------- desugar

def desugar(node: Node) -> Node:
    """Rewrite false, |, ->, F and G into the core constructors."""
    if isinstance(node, (TrueF, Atom, Const)):
        return node
    if isinstance(node, FalseF):
        return Not(TrueF())
    if isinstance(node, Not):
        return Not(desugar(node.arg))
    if isinstance(node, And):
        return And(desugar(node.left), desugar(node.right))
    if isinstance(node, Or):
        return Not(And(Not(desugar(node.left)), Not(desugar(node.right))))
    if isinstance(node, Implies):
        return Not(And(desugar(node.left), Not(desugar(node.right))))
    if isinstance(node, Compare):
        return Compare(node.op, desugar(node.left), desugar(node.right))
    if isinstance(node, Arith):
        return Arith(node.op, desugar(node.left), desugar(node.right))
    if isinstance(node, Prob):
        path = node.path
        if isinstance(path, Next):
            return Prob(Next(desugar(path.arg)))
        if isinstance(path, Until):
            return Prob(Until(desugar(path.left), desugar(path.right)))
        if isinstance(path, Eventually):
            return Prob(Until(TrueF(), desugar(path.arg)))
        if isinstance(path, Globally):
            return Arith("-", Const(Fraction(1)), Prob(Until(TrueF(), Not(desugar(path.arg)))))
    raise FormulaError(f"unexpected node {node!r}")


def is_desugared(node: Node) -> bool:
    return not any(isinstance(n, (FalseF, Or, Implies, Eventually, Globally)) for n in walk(node))


def desugar_formula(f: HyperFormula) -> HyperFormula:
    return replace(f, body=desugar(f.body))


# --------------------------------------------------------- prefix analysis

def is_existential(f: HyperFormula) -> bool:
    """Scheduler and all stutter quantifiers existential (state quantifiers are free)."""
    return f.sched.kind is QuantKind.EXISTS and all(q.kind is QuantKind.EXISTS for q in f.stutters)


def is_universal(f: HyperFormula) -> bool:
    return f.sched.kind is QuantKind.FORALL and all(q.kind is QuantKind.FORALL for q in f.stutters)


def negate_prefix(f: HyperFormula) -> HyperFormula:
    """Dual of a formula with universal scheduler and stutter quantifiers.

    Every quantifier is flipped and the body negated, so ``f`` holds iff the
    result does not.
    """
    if not is_universal(f):
        raise UnsupportedFragment(
            "dualization needs universal scheduler and stutter quantifiers; "
            "mixed scheduler/stutter alternation is not supported")
    return dualize(f)


def dualize(f: HyperFormula) -> HyperFormula:
    """Flip every quantifier and negate the body (no fragment check)."""
    body = f.body.arg if isinstance(f.body, Not) else Not(f.body)
    return HyperFormula(
        SchedQuant(f.sched.kind.flip(), f.sched.var),
        tuple(StateQuant(q.kind.flip(), q.var, q.sched) for q in f.states),
        tuple(StutterQuant(q.kind.flip(), q.var, q.state) for q in f.stutters),
        body,
    )


@dataclass(frozen=True)
class ExperimentMap:
    n: int
    l: int
    k: Tuple[int, ...]  # 1-based state-quantifier index per stutter quantifier
    body: Formula  # atoms re-indexed to 1-based experiment numbers


def index_atoms(node: Node, index: Dict[str, int]) -> Node:
    if isinstance(node, Atom):
        return Atom(node.ap, index[node.var]) if isinstance(node.var, str) else node
    if isinstance(node, (Not, Next, Eventually, Globally)):
        return type(node)(index_atoms(node.arg, index))
    if isinstance(node, (And, Or, Implies, Until)):
        return type(node)(index_atoms(node.left, index), index_atoms(node.right, index))
    if isinstance(node, (Compare, Arith)):
        return type(node)(node.op, index_atoms(node.left, index), index_atoms(node.right, index))
    if isinstance(node, Prob):
        return Prob(index_atoms(node.path, index))
    return node


def experiment_map(f: HyperFormula) -> ExperimentMap:
    state_pos = {q.var: i + 1 for i, q in enumerate(f.states)}
    k = tuple(state_pos[q.state] for q in f.stutters)
    exp_index = {q.var: i + 1 for i, q in enumerate(f.stutters)}
    return ExperimentMap(len(f.stutters), len(f.states), k, index_atoms(f.body, exp_index))


def experiments_of(node: Node) -> Tuple[int, ...]:
    """Sorted experiment indices whose atoms occur in ``node`` (atoms must be indexed)."""
    return tuple(sorted({n.var for n in walk(node) if isinstance(n, Atom)}))
