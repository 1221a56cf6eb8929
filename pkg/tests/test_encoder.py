from fractions import Fraction

import pytest

from ahmc.encoder import encode, encode_body, smt_num
from ahmc.formula import UnsupportedFragment, experiment_map, parse_formula
from ahmc.oracle import SchedulerDomain, check_by_enumeration, next_probability
from ahmc.model import CountingStutterScheduler, MemorylessScheduler, induce_dtmc
from ahmc.randgen import JOINT_TEMPLATES, random_formula, random_mdp
from ahmc.solver import Verdict, check_smt, run_solver

from conftest import choice_mdp, requires_z3, two_state_chain

PREFIX1 = "exists sched sg . exists state s(sg) . exists stutter t(s) . "
PREFIX2 = ("exists sched sg . exists state s1(sg) . exists state s2(sg) . "
           "exists stutter t1(s1) . exists stutter t2(s2) . ")


def body_of(text):
    return experiment_map(parse_formula(text)).body


def test_smt_num():
    assert smt_num(0) == "0.0"
    assert smt_num(Fraction(1, 2)) == "(/ 1.0 2.0)"
    assert smt_num(Fraction(-3, 4)) == "(- (/ 3.0 4.0))"


def test_scheduler_choice_choice():
    cs = encode_body(choice_mdp(), body_of(PREFIX1 + "true"), 1, 1).cs
    assert set(cs.sigma_vars) == {(("alpha", "beta"), "alpha"), (("alpha", "beta"), "beta"), (("loop",), "loop")}
    assert "(= (+ sigma_alpha_beta_alpha sigma_alpha_beta_beta) 1.0)" in cs.assertions
    assert "(= sigma_loop_loop 1.0)" in cs.assertions


@pytest.mark.parametrize("n, m", [(1, 1), (2, 3), (3, 2)])
def test_stutter_variable_count(n, m):
    mdp = choice_mdp()
    enc = encode_body(mdp, body_of(PREFIX1 + "true"), n, m)
    assert len(enc.cs.tau_vars) == n * sum(len(mdp.enabled_actions(s)) for s in mdp.states)
    v = enc.cs.tau_vars[(n, "s0", "alpha")]
    domain = " ".join(f"(= {v} {j}.0)" for j in range(m))
    assert (domain if m == 1 else f"(or {domain})") in enc.cs.assertions


def test_go_tr_declared_per_succ_plus_edge():
    mdp = choice_mdp()
    enc = encode_body(mdp, body_of(PREFIX1 + "true"), 1, 3)
    # for j < 2, (s0, j) has alpha with 2 proceed targets and beta with 1, plus one
    # stutter edge per action; at j = 2 only the proceed edges remain. s1..s3 have one
    # proceed target and a stutter edge for j < 2
    expected = 2 * (3 + 2) + 3 + 3 * (2 * 2 + 1)
    assert len(enc.go) == expected


def test_holds_count_without_reduction():
    mdp = choice_mdp()
    for n, m in ((1, 2), (2, 2), (2, 3)):
        text = PREFIX2 + "a(t1) & !(a(t1))" if n == 2 else PREFIX1 + "a(t) & !(a(t))"
        cs = encode(mdp, parse_formula(text), m, relevant_only=False)
        for nid, node in cs.subformulas.items():
            assert cs.holds_count(nid) == (len(mdp.states) * m) ** n


def test_relevant_reduction_shrinks_scope():
    mdp = choice_mdp()
    cs = encode(mdp, parse_formula(PREFIX2 + "a(t1) & end(t2)"), 2)
    sizes = sorted(cs.holds_count(nid) for nid in cs.subformulas)
    assert sizes == [8, 8, 64]


def test_atom_holds_follow_labels():
    mdp = choice_mdp()
    cs = encode(mdp, parse_formula(PREFIX2 + "a(t1) & true"), 2, relevant_only=False)
    atom = next(i for i, nd in cs.subformulas.items() if type(nd).__name__ == "Atom")
    for (nid, t), v in cs.holds_vars.items():
        if nid != atom:
            continue
        if t[0][0] == "s1":
            assert v in cs.assertions
        else:
            assert f"(not {v})" in cs.assertions


def test_until_boundary_constraints():
    mdp = two_state_chain()
    cs = encode(mdp, parse_formula(PREFIX1 + "P(F a(t)) = 1"), 1)
    until = next(i for i, nd in cs.subformulas.items() if type(nd).__name__ == "Prob")
    p_s1 = cs.prob_vars[(until, (("s1", 0),))]
    atom = next(i for i, nd in cs.subformulas.items() if type(nd).__name__ == "Atom")
    h_s1 = cs.holds_vars[(atom, (("s1", 0),))]
    assert f"(=> {h_s1} (= {p_s1} 1.0))" in cs.assertions
    assert f"(<= 0.0 {p_s1})" in cs.assertions


def test_truth_block_shapes():
    mdp = two_state_chain()
    cs = encode(mdp, parse_formula("exists sched sg . forall state s1(sg) . forall state s2(sg) . "
                                   "exists stutter t1(s1) . exists stutter t2(s2) . true"), 1, relevant_only=False)
    truth = cs.assertions[-1]
    assert truth.startswith("(and (and ")
    assert truth.count("holds_") == 4 and "_1_" not in truth

    single = choice_mdp()
    one = type(single).build(["s0"], {}, {("s0", "x"): {"s0": 1}})
    cs = encode(one, parse_formula(PREFIX1 + "true"), 1, relevant_only=False)
    assert cs.assertions[-1] == "holds_s0_0_0"
    # with the reduction, ``true`` mentions no experiment and gets one variable
    cs = encode(one, parse_formula(PREFIX1 + "true"), 1)
    assert cs.assertions[-1] == "holds_e_0"

    cs = encode(mdp, parse_formula("exists sched sg . forall state s1(sg) . exists state s2(sg) . "
                                   "exists stutter t1(s1) . exists stutter t2(s2) . true"), 1, relevant_only=False)
    assert cs.assertions[-1].startswith("(and (or ")


def test_emission_is_deterministic():
    mdp = choice_mdp()
    f = parse_formula(PREFIX2 + "P(F a(t1)) = P(X end(t2))")
    first = encode(mdp, f, 2).to_smtlib()
    second = encode(mdp, f, 2).to_smtlib()
    assert first == second
    names = [line.split()[1] for line in first.splitlines() if line.startswith("(declare-fun")]
    assert len(names) == len(set(names))


def test_unguarded_form_is_plain_products():
    mdp = two_state_chain()
    text = encode(mdp, parse_formula(PREFIX1 + "P(X a(t)) > 0"), 2, guarded=False).to_smtlib()
    assert "(ite (and (= go" not in text
    assert "(* sigma_go_go go_" in text


def test_encode_rejects_universal():
    with pytest.raises(UnsupportedFragment):
        encode(choice_mdp(), parse_formula("forall sched sg . forall state s(sg) . forall stutter t(s) . true"), 1)


def test_weird_identifiers_are_sanitised():
    mdp = type(choice_mdp()).build(["a-b", "c.d"], {"c.d": ["x"]},
                                 {("a-b", "go!"): {"c.d": 1}, ("c.d", "go!"): {"c.d": 1}})
    text = encode(mdp, parse_formula(PREFIX1 + "P(F x(t)) = 1"), 1).to_smtlib()
    assert "a-b" not in text and "go!" not in text


# ------------------------------------------------------------ via the solver

@requires_z3
def test_go_tr_values_choice():
    mdp = choice_mdp()
    enc = encode_body(mdp, body_of(PREFIX1 + "true"), 1, 3)
    cs = enc.cs
    cs.add(f"(= {cs.tau_vars[(1, 's0', 'alpha')]} 2.0)")
    stut_go, stut_tr = enc.go[(1, ("s0", 0), "alpha", ("s0", 1))]
    go, tr = enc.go[(1, ("s0", 0), "alpha", ("s1", 0))]
    res = run_solver(cs, extra_values=[stut_go, stut_tr, go, tr], want_witness=False, timeout=30)
    assert res.verdict is Verdict.SAT
    assert (res.values[stut_go], res.values[stut_tr]) == (1, 1)
    assert (res.values[go], res.values[tr]) == (0, Fraction(1, 2))


@requires_z3
def test_next_probability_matches_oracle():
    mdp = two_state_chain()
    f = parse_formula(PREFIX1 + "P(X a(t)) >= 0")
    cs = encode(mdp, f, 1)
    nxt = next(i for i, nd in cs.subformulas.items() if type(nd).__name__ == "Prob")
    var = cs.prob_vars[(nxt, (("s0", 0),))]
    res = run_solver(cs, extra_values=[var], timeout=30)
    d = induce_dtmc(mdp, MemorylessScheduler.uniform(mdp), CountingStutterScheduler.zero(1))
    assert res.values[var] == next_probability(d, ("s0", 0), [("s1", 0)]) == Fraction(1, 2)


@requires_z3
@pytest.mark.parametrize("body, expected", [
    ("P(F a(t)) = 1", True),
    ("P(X a(t)) = 1/2 & !(a(t))", True),
    ("P(X a(t)) = 1/3", False),
    ("P(G !(a(t))) > 0 & !(a(t))", False),
])
def test_synchronous_case_matches_oracle(body, expected):
    mdp = two_state_chain()
    f = parse_formula(PREFIX1 + body)
    assert check_by_enumeration(mdp, f, 1).holds is expected
    assert check_smt(mdp, f, 1, timeout=60).holds is expected


@requires_z3
def test_joint_until_templates_on_tiny_models():
    """Untils over both experiments, on two-state models where the solver stays fast."""
    import random
    rng = random.Random(17)
    checked = 0
    for _ in range(6):
        mdp = random_mdp(rng, 2)
        f = random_formula(rng, rng.choice(JOINT_TEMPLATES))
        expected = check_by_enumeration(mdp, f, 2, SchedulerDomain.SINGLE_ACTION).holds
        out = check_smt(mdp, f, 2, timeout=60)
        if out.verdict is Verdict.TIMEOUT:
            continue
        assert out.holds is expected, str(f)
        checked += 1
    assert checked >= 4
