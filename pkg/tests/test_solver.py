import os
from fractions import Fraction

import psutil
import pytest

from ahmc.encoder import ConstraintSystem, encode
from ahmc.fixtures import build_tl
from ahmc.formula import UnsupportedFragment, parse_formula
from ahmc.solver import (SolverError, SolverResult, Verdict, Witness, check_smt, parse_solver_output,
                         report_verdict, run_solver, solver_accepts)

from conftest import choice_mdp, requires_z3, two_state_chain

PREFIX1 = "exists sched sg . exists state s(sg) . exists stutter t(s) . "
UNIVERSAL1 = "forall sched sg . forall state s(sg) . forall stutter t(s) . "


def test_parse_sat_with_values():
    out = "sat\n((x 1.0) (y (/ 1.0 3.0)) (z (- 2.0)) (b true))\n"
    verdict, values, approx = parse_solver_output(out, ["x", "y", "z", "b"])
    assert verdict is Verdict.SAT
    assert values == {"x": 1, "y": Fraction(1, 3), "z": -2, "b": True}
    assert approx == ()


def test_parse_algebraic_falls_back_to_decimal():
    out = ("sat\n((x (root-obj (+ (^ x 2) (- 2)) 2)))\n"
           "((x 1.4142135623730950488016887242096980785696?))\n")
    verdict, values, approx = parse_solver_output(out, ["x"])
    assert approx == ("x",)
    assert abs(values["x"] - Fraction(14142135623730950488, 10 ** 19)) < Fraction(1, 10 ** 18)


def test_parse_algebraic_without_decimal_fails():
    with pytest.raises(SolverError, match="algebraic"):
        parse_solver_output("sat\n((x (root-obj (+ (^ x 2) (- 2)) 2)))\n", ["x"])


@pytest.mark.parametrize("text, verdict", [("unsat\n", Verdict.UNSAT), ("unknown\n", Verdict.UNKNOWN)])
def test_parse_other_verdicts(text, verdict):
    assert parse_solver_output(text, ["x"])[0] is verdict


@pytest.mark.parametrize("text", ["", "hello\n", "(error \"line 3\")\n", "sat\n((x 1.0)\n"])
def test_parse_malformed(text):
    with pytest.raises(SolverError):
        parse_solver_output(text, ["x"])


def test_parse_missing_value():
    with pytest.raises(SolverError, match="no value for y"):
        parse_solver_output("sat\n((x 1.0))\n", ["x", "y"])


def test_report_verdict_mapping():
    f = parse_formula(PREFIX1 + "true")
    assert report_verdict(f, SolverResult(Verdict.SAT), False).holds is True
    assert report_verdict(f, SolverResult(Verdict.UNSAT), False).holds is False
    assert report_verdict(f, SolverResult(Verdict.UNSAT), True).holds is True
    sat_dual = report_verdict(f, SolverResult(Verdict.SAT, Witness({}, {})), True)
    assert sat_dual.holds is False and sat_dual.counterexample is not None
    timeout = report_verdict(f, SolverResult(Verdict.TIMEOUT), False)
    assert timeout.holds is None and timeout.exit_code == 2 and timeout.verdict is Verdict.TIMEOUT


def test_witness_scheduler_is_renormalised():
    w = Witness({(("a", "b"), "a"): Fraction(1, 3) + Fraction(1, 10 ** 12), (("a", "b"), "b"): Fraction(2, 3)},
                {(1, "s", "a"): 1, (2, "s", "a"): 0})
    sched = w.scheduler()
    assert sum(sched.dist[("a", "b")].values()) == 1
    t1, t2 = w.stutterers(2, 2)
    assert t1.duration("s", "a") == 1 and t2.duration("s", "a") == 0


def test_missing_solver_binary():
    cs = ConstraintSystem()
    cs.add("true")
    with pytest.raises(SolverError, match="not found"):
        run_solver(cs, command="no-such-solver-binary-xyz")


def test_mixed_prefix_rejected():
    f = parse_formula("forall sched sg . forall state s(sg) . exists stutter t(s) . true")
    with pytest.raises(UnsupportedFragment):
        check_smt(choice_mdp(), f, 1)


@requires_z3
def test_assert_false_is_unsat():
    cs = ConstraintSystem()
    cs.declare("x")
    cs.add("false")
    assert run_solver(cs, timeout=30).verdict is Verdict.UNSAT


@requires_z3
def test_sat_with_witness():
    mdp = choice_mdp()
    out = check_smt(mdp, parse_formula(PREFIX1 + "P(F end(t)) = 1/2 & !(end(t))"), 1, timeout=60)
    assert out.holds is True and out.exit_code == 0
    assert out.witness.scheduler_probs[(("alpha", "beta"), "beta")] == Fraction(1, 2)


@requires_z3
def test_universal_prefix_counterexample():
    out = check_smt(choice_mdp(), parse_formula(UNIVERSAL1 + "P(F end(t)) = 1"), 1, timeout=60)
    assert out.dualized and out.verdict is Verdict.SAT
    assert out.holds is False and out.counterexample is not None


@requires_z3
def test_universal_prefix_holds():
    out = check_smt(two_state_chain(), parse_formula(UNIVERSAL1 + "P(F a(t)) = 1"), 2, timeout=60)
    assert out.dualized and out.verdict is Verdict.UNSAT and out.holds is True


def _solver_children():
    return [p for p in psutil.Process(os.getpid()).children(recursive=True) if p.is_running()]


@requires_z3
def test_tl_timeout_and_no_orphans(tmp_path):
    fx = build_tl(1)
    out = check_smt(fx.mdp, fx.formula, 2, timeout=1, dump_smt=str(tmp_path / "tl.smt2"))
    assert out.verdict is Verdict.TIMEOUT and out.holds is None
    assert (tmp_path / "tl.smt2").stat().st_size > 0
    assert _solver_children() == []


@requires_z3
def test_solver_accepts_and_rejects():
    cs = encode(two_state_chain(), parse_formula(PREFIX1 + "P(F a(t)) = 1"), 2)
    ok, diag = solver_accepts(cs, timeout=60)
    assert ok, diag
    cs.add("(+ undeclared_symbol 1.0)")
    ok, diag = solver_accepts(cs, timeout=60)
    assert not ok and "error" in diag
