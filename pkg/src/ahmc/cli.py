"""Command line front end: ``ahmc check | fixture | validate``.

Exit codes: 0 the property holds (or the model is valid), 1 it fails (or
the model has violations), 2 unknown or timeout, 3 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from fractions import Fraction
from typing import List, Optional

from . import fixtures
from .formula import FormulaError, HyperFormula, UnsupportedFragment, parse_formula
from .model import Mdp, ModelError, parse_mdp, validate_mdp
from .oracle import SchedulerDomain, check_by_enumeration
from .solver import SolverError, Verdict, Witness, check_smt

EXIT_HOLDS, EXIT_FAILS, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default, which means "unknown" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_model(path: str, strict: bool = True) -> Mdp:
    try:
        with open(path) as fh:
            return parse_mdp(fh.read(), strict=strict)
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}") from exc


def _read_formula(arg: str) -> HyperFormula:
    """``arg`` is a path if such a file exists, the formula text otherwise."""
    text = arg
    if os.path.isfile(arg):
        with open(arg) as fh:
            text = "\n".join(line.split("#", 1)[0] for line in fh)
    return parse_formula(text)


def _print_witness(w: Witness, label: str, out) -> None:
    print(f"{label} scheduler:", file=out)
    for (A, a), p in sorted(w.scheduler_probs.items()):
        print(f"  sigma[{{{','.join(A)}}}][{a}] = {p}", file=out)
    stutters = {k: v for k, v in w.stutter_durations.items() if v}
    print(f"{label} stutter durations (nonzero):", file=out)
    for (i, s, a), j in sorted(stutters.items()):
        print(f"  tau{i}[{s},{a}] = {j}", file=out)
    if not stutters:
        print("  (none)", file=out)
    if w.approximate:
        print("  note: some values are algebraic; rational approximations shown", file=out)


def _policy(mdp: Mdp, name: str) -> SchedulerDomain:
    if name == "auto":
        return SchedulerDomain.SINGLE_ACTION if mdp.is_single_action() else SchedulerDomain.DETERMINISTIC
    return SchedulerDomain(name)


def cmd_check(args, out) -> int:
    mdp = _read_model(args.model)
    f = _read_formula(args.formula)
    if args.memory < 1:
        raise UsageError("--memory must be >= 1")
    if args.oracle:
        t0 = time.perf_counter()
        res = check_by_enumeration(mdp, f, args.memory, _policy(mdp, args.policy), Fraction(args.grid_step))
        elapsed = time.perf_counter() - t0
        verdict = {True: "holds", False: "fails", None: "unknown"}[res.holds]
        print(verdict, file=out)
        if res.note and res.scheduler is None:
            print(f"note: {res.note}", file=out)
        if res.scheduler is not None:
            print(f"{res.note} scheduler:", file=out)
            for A, dist in res.scheduler.dist.items():
                for a, p in dist.items():
                    print(f"  sigma[{{{','.join(A)}}}][{a}] = {p}", file=out)
        if args.stats:
            print(f"evaluations={res.evaluations}", file=out)
            print(f"oracle_time={elapsed:.4f}", file=out)
        return {True: EXIT_HOLDS, False: EXIT_FAILS, None: EXIT_UNKNOWN}[res.holds]

    outcome = check_smt(mdp, f, args.memory, command=args.solver, timeout=args.timeout,
                        dump_smt=args.dump_smt, relevant_only=not args.no_opt)
    verdict = {True: "holds", False: "fails", None: "unknown"}[outcome.holds]
    if outcome.verdict is Verdict.TIMEOUT:
        verdict = "timeout"
    print(verdict, file=out)
    if outcome.witness is not None:
        _print_witness(outcome.witness, "counterexample" if outcome.dualized else "witness", out)
    if args.stats and outcome.result is not None:
        stats = dict(outcome.result.stats)
        stats["solver_verdict"] = outcome.verdict.value
        stats["dualized"] = outcome.dualized
        for k, v in stats.items():
            print(f"{k}={v}", file=out)
    return outcome.exit_code


def cmd_fixture(args, out) -> int:
    name = args.name.upper()
    params = tuple(args.params)
    if name == "CE" and len(params) not in (0, 2):
        raise UsageError("CE takes two secret values, e.g. 'fixture CE 0 1'")
    if name == "TL" and len(params) > 1:
        raise UsageError("TL takes one key length, e.g. 'fixture TL 1'")
    if name == "ACDB" and params:
        raise UsageError("ACDB takes no parameters")
    options = {"only_l0": True} if (name == "TL" and args.only_l0) else {}
    try:
        fx = fixtures.build(name, *params, **options)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model_path, formula_path = fx.write(args.out)
    n_states, n_trans = fx.size()
    print(f"wrote {model_path} ({n_states} states, {n_trans} transitions)", file=out)
    print(f"wrote {formula_path}", file=out)
    return EXIT_HOLDS


def cmd_validate(args, out) -> int:
    mdp = _read_model(args.model, strict=False)
    problems = validate_mdp(mdp)
    for p in problems:
        print(p, file=out)
    if problems:
        return EXIT_FAILS
    print(f"ok: {len(mdp.states)} states, {mdp.num_transitions()} transitions", file=out)
    return EXIT_HOLDS


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ahmc", description="Model checker for asynchronous probabilistic hyperproperties.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check a formula on a model")
    c.add_argument("--model", required=True)
    c.add_argument("--formula", required=True, help="formula file or formula text")
    c.add_argument("--memory", "-m", type=int, required=True, help="stutter memory bound m")
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--smt", action="store_true", help="encode and solve (default)")
    mode.add_argument("--oracle", action="store_true", help="explicit enumeration instead of SMT")
    c.add_argument("--solver", help="solver command line (default: $AHMC_SOLVER or 'z3 -smt2')")
    c.add_argument("--timeout", type=float, help="solver timeout in seconds")
    c.add_argument("--dump-smt", metavar="PATH", help="also write the SMT-LIB query to PATH")
    c.add_argument("--no-opt", action="store_true", help="disable the relevant-quantifier optimization")
    c.add_argument("--stats", action="store_true", help="print key=value statistics")
    c.add_argument("--policy", default="auto", choices=["auto", "single", "deterministic", "grid"],
                   help="oracle scheduler domain")
    c.add_argument("--grid-step", default="1/4", help="oracle grid resolution (1/N)")
    c.set_defaults(func=cmd_check)

    fx = sub.add_parser("fixture", help="write a case-study model and formula")
    fx.add_argument("name", choices=["CE", "TL", "ACDB", "ce", "tl", "acdb"])
    fx.add_argument("params", nargs="*", type=int)
    fx.add_argument("--out", required=True, help="output directory")
    fx.add_argument("--only-l0", action="store_true", help="TL: compare only the j=0 observation")
    fx.set_defaults(func=cmd_fixture)

    v = sub.add_parser("validate", help="check a model file for well-formedness")
    v.add_argument("--model", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (UsageError, ModelError, FormulaError, UnsupportedFragment, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
