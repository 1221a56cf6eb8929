"""Drive an external SMT solver over an emitted constraint system."""

from __future__ import annotations

import enum
import os
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .encoder import ConstraintSystem, encode
from .formula import HyperFormula, UnsupportedFragment, is_existential, is_universal, negate_prefix
from .model import Mdp

DEFAULT_SOLVER = "z3 -smt2"
SOLVER_ENV = "AHMC_SOLVER"


class SolverError(RuntimeError):
    """Solver missing or produced output we cannot interpret."""


class Verdict(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass
class Witness:
    scheduler_probs: Dict[Tuple[Tuple[str, ...], str], Fraction]
    stutter_durations: Dict[Tuple[int, str, str], int]
    approximate: bool = False  # some value was an algebraic number, rounded

    def scheduler(self):
        """The witness scheduler, renormalised so each action set sums to exactly 1."""
        from .model import MemorylessScheduler
        by_set: Dict[Tuple[str, ...], Dict[str, Fraction]] = {}
        for (A, a), p in self.scheduler_probs.items():
            by_set.setdefault(A, {})[a] = min(max(p, Fraction(0)), Fraction(1))
        for A, d in by_set.items():
            last = A[-1]
            d[last] = 1 - sum((v for a, v in d.items() if a != last), Fraction(0))
            if d[last] < 0:
                total = sum(d.values(), Fraction(0)) - d[last]
                d.update({a: v / total for a, v in d.items() if a != last})
                d[last] = Fraction(0)
        return MemorylessScheduler(by_set)

    def stutterers(self, n: int, m: int):
        from .model import CountingStutterScheduler
        out = []
        for i in range(1, n + 1):
            durs = {(s, a): j for (e, s, a), j in self.stutter_durations.items() if e == i and j}
            out.append(CountingStutterScheduler(m, durs))
        return tuple(out)


@dataclass
class SolverResult:
    verdict: Verdict
    witness: Optional[Witness] = None
    values: Dict[str, Union[Fraction, bool]] = field(default_factory=dict)
    approximate: Tuple[str, ...] = ()
    wall_time: float = 0.0
    stats: Dict[str, object] = field(default_factory=dict)
    raw: str = ""


# ------------------------------------------------------------ s-expressions

def _tokens(text: str) -> List[str]:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            out.append(c)
            i += 1
        elif c == '"':
            j = text.index('"', i + 1)
            out.append(text[i:j + 1])
            i = j + 1
        elif c == "|":
            j = text.index("|", i + 1)
            out.append(text[i + 1:j])
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def parse_sexprs(text: str) -> list:
    toks = _tokens(text)
    stack: List[list] = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise SolverError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise SolverError("unbalanced '(' in solver output")
    return stack[0]


class _Algebraic(Exception):
    pass


def sexpr_value(e) -> Union[Fraction, bool]:
    """Exact value of a solver-printed constant; raises for algebraic numbers."""
    if isinstance(e, str):
        if e == "true":
            return True
        if e == "false":
            return False
        if e.endswith("?"):
            raise _Algebraic(e)
        return Fraction(e)
    head = e[0]
    if head == "-" and len(e) == 2:
        return -sexpr_value(e[1])
    if head == "/" and len(e) == 3:
        return sexpr_value(e[1]) / sexpr_value(e[2])
    if head in ("root-obj", "_"):
        raise _Algebraic(str(e))
    raise SolverError(f"cannot interpret value {e!r}")


def _decimal_value(e) -> Fraction:
    if isinstance(e, str):
        return Fraction(e.rstrip("?"))
    if e[0] == "-" and len(e) == 2:
        return -_decimal_value(e[1])
    if e[0] == "/" and len(e) == 3:
        return _decimal_value(e[1]) / _decimal_value(e[2])
    raise SolverError(f"cannot interpret decimal value {e!r}")


def parse_solver_output(text: str, names: Sequence[str]) -> Tuple[Verdict, Dict, Tuple[str, ...]]:
    exprs = parse_sexprs(text)
    if not exprs or not isinstance(exprs[0], str):
        raise SolverError(f"malformed solver output: {text[:200]!r}")
    head = exprs[0]
    try:
        verdict = Verdict(head)
    except ValueError:
        raise SolverError(f"malformed solver output: {text[:200]!r}") from None
    if verdict is not Verdict.SAT or not names:
        return verdict, {}, ()
    blocks = [e for e in exprs[1:] if isinstance(e, list) and e and isinstance(e[0], list)]
    errors = [e for e in exprs[1:] if isinstance(e, list) and e and e[0] == "error"]
    if not blocks:
        raise SolverError(f"solver returned no model values: {errors or text[:200]!r}")
    exact = {pair[0] if isinstance(pair[0], str) else str(pair[0]): pair[1] for pair in blocks[0]}
    decimal = {}
    if len(blocks) > 1:
        decimal = {pair[0] if isinstance(pair[0], str) else str(pair[0]): pair[1] for pair in blocks[1]}
    values = {}
    approx = []
    for name in names:
        if name not in exact:
            raise SolverError(f"no value for {name} in solver output")
        try:
            values[name] = sexpr_value(exact[name])
        except _Algebraic:
            if name not in decimal:
                raise SolverError(f"{name} is algebraic and no decimal approximation was printed") from None
            values[name] = _decimal_value(decimal[name])
            approx.append(name)
    return verdict, values, tuple(approx)


# ------------------------------------------------------------------ running

def solver_command(command: Optional[str] = None) -> List[str]:
    cmd = command or os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER
    argv = shlex.split(cmd)
    if not argv or shutil.which(argv[0]) is None:
        raise SolverError(f"solver executable not found: {cmd!r}")
    return argv


def run_solver(system: ConstraintSystem, command: Optional[str] = None, timeout: Optional[float] = None,
               dump_smt: Optional[str] = None, extra_values: Sequence[str] = (),
               want_witness: bool = True) -> SolverResult:
    """Write the system to a file, run the solver once and decode the answer.

    On SAT the scheduler and stutter variables (plus ``extra_values``) are
    queried. A timeout yields ``Verdict.TIMEOUT``; the child is killed and
    reaped before returning.
    """
    argv = solver_command(command)
    names = []
    if want_witness:
        names += list(system.sigma_vars.values()) + list(system.tau_vars.values())
    names += [v for v in extra_values if v not in names]
    text = system.to_smtlib(get_values=names)
    if dump_smt:
        with open(dump_smt, "w") as fh:
            fh.write(system.to_smtlib())
    stats = dict(system.stats)
    with tempfile.TemporaryDirectory(prefix="ahmc-") as tmp:
        path = os.path.join(tmp, "query.smt2")
        with open(path, "w") as fh:
            fh.write(text)
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(argv + [path], capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            # subprocess.run kills and waits for the child before raising
            elapsed = time.perf_counter() - t0
            stats["solve_time"] = round(elapsed, 4)
            return SolverResult(Verdict.TIMEOUT, wall_time=elapsed, stats=stats)
        except OSError as exc:
            raise SolverError(f"could not start solver: {exc}") from exc
        elapsed = time.perf_counter() - t0
    stats["solve_time"] = round(elapsed, 4)
    out = proc.stdout
    if not out.strip():
        raise SolverError(f"solver produced no output (exit {proc.returncode}): {proc.stderr.strip()[:200]}")
    if out.lstrip().startswith("timeout"):
        return SolverResult(Verdict.TIMEOUT, wall_time=elapsed, stats=stats, raw=out)
    verdict, values, approx = parse_solver_output(out, names)
    witness = None
    if verdict is Verdict.SAT and want_witness:
        probs = {key: values[v] for key, v in system.sigma_vars.items()}
        durs = {}
        for key, v in system.tau_vars.items():
            val = values[v]
            if val.denominator != 1 or not 0 <= val < system.m:
                raise SolverError(f"stutter duration {v} = {val} is not an integer in [0, {system.m})")
            durs[key] = int(val)
        witness = Witness(probs, durs, approximate=bool(approx))
    return SolverResult(verdict, witness, values, approx, elapsed, stats, out)


def solver_accepts(system: ConstraintSystem, command: Optional[str] = None,
                   timeout: Optional[float] = 120) -> Tuple[bool, str]:
    """Feed the declarations and assertions (no ``check-sat``) to the solver.

    Returns ``(accepted, diagnostics)``; the solver reports syntax and sort
    errors as ``(error ...)`` lines while reading the script.
    """
    argv = solver_command(command)
    with tempfile.TemporaryDirectory(prefix="ahmc-") as tmp:
        path = os.path.join(tmp, "parse.smt2")
        with open(path, "w") as fh:
            fh.write(system.to_smtlib(check_sat=False))
        proc = subprocess.run(argv + [path], capture_output=True, text=True, timeout=timeout)
    diag = (proc.stdout + proc.stderr).strip()
    return "(error" not in diag, diag


# ----------------------------------------------------------------- verdicts

@dataclass
class CheckOutcome:
    holds: Optional[bool]
    verdict: Verdict
    dualized: bool
    witness: Optional[Witness] = None  # counterexample when dualized and SAT
    result: Optional[SolverResult] = None

    @property
    def exit_code(self) -> int:
        if self.holds is None:
            return 2
        return 0 if self.holds else 1

    @property
    def counterexample(self) -> Optional[Witness]:
        return self.witness if self.dualized else None


def report_verdict(f: HyperFormula, result: SolverResult, dualized: bool) -> CheckOutcome:
    if result.verdict is Verdict.SAT:
        holds: Optional[bool] = not dualized
    elif result.verdict is Verdict.UNSAT:
        holds = dualized
    else:
        holds = None
    return CheckOutcome(holds, result.verdict, dualized, result.witness, result)


def check_smt(mdp: Mdp, f: HyperFormula, m: int, command: Optional[str] = None,
              timeout: Optional[float] = None, dump_smt: Optional[str] = None,
              relevant_only: bool = True) -> CheckOutcome:
    """Encode, solve and interpret; universal prefixes go through the dual formula."""
    if is_existential(f):
        target, dualized = f, False
    elif is_universal(f):
        target, dualized = negate_prefix(f), True
    else:
        raise UnsupportedFragment(
            "only existential or purely universal scheduler/stutter quantification is supported")
    system = encode(mdp, target, m, relevant_only=relevant_only)
    result = run_solver(system, command, timeout, dump_smt)
    return report_verdict(f, result, dualized)
