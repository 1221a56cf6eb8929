from fractions import Fraction

import pytest

from ahmc.fixtures import TARGET_SIZES, build, build_acdb, build_ce, build_tl
from ahmc.formula import experiment_map, is_existential
from ahmc.model import CountingStutterScheduler, MemorylessScheduler, induce_dtmc, parse_mdp, validate_mdp
from ahmc.oracle import until_probability


@pytest.mark.parametrize("name, params", sorted(TARGET_SIZES))
def test_published_sizes(name, params):
    fx = build(name, *params)
    assert fx.size() == TARGET_SIZES[(name, params)]
    assert fx.check_size()


@pytest.mark.parametrize("fx", [build_ce(0, 1), build_ce(0, 2), build_tl(1), build_tl(2), build_acdb()],
                         ids=["ce01", "ce02", "tl1", "tl2", "acdb"])
def test_fixture_models_are_valid(fx):
    assert validate_mdp(fx.mdp) == []
    f = fx.formula
    assert is_existential(f)
    em = experiment_map(f)
    assert (em.n, em.l, em.k) == (2, 2, (1, 2))


def test_tl2_size():
    assert build_tl(2).size() == (85, 149)


def test_initial_labels():
    mdp = build_ce(0, 1).mdp
    inits = [s for s in mdp.states if "init" in mdp.labels[s]]
    assert sorted(inits) == ["h0both", "h1both"]
    assert "h1" in mdp.labels["h1both"]


def test_ce_needs_distinct_secrets():
    with pytest.raises(ValueError):
        build_ce(1, 1)


def test_tl_only_l0_formula():
    text = build_tl(1, only_l0=True).formula_text
    assert "j0(t1)" in text and "j1(t1)" not in text


def test_unknown_fixture():
    with pytest.raises(ValueError):
        build("XYZ")


def test_write_round_trip(tmp_path):
    fx = build_acdb()
    model_path, formula_path = fx.write(str(tmp_path))
    with open(model_path) as fh:
        again = parse_mdp(fh.read())
    assert dict(again.trans) == dict(fx.mdp.trans)
    with open(formula_path) as fh:
        assert fh.read().strip() == fx.formula_text


def test_ce_leaks_without_stuttering():
    # uniform scheduler: from h=0 the two threads race once and l1 needs th first
    # (1/2); from h=1, th must also take the first step, then the same race (1/4)
    mdp = build_ce(0, 1).mdp
    d = induce_dtmc(mdp, MemorylessScheduler.uniform(mdp), CountingStutterScheduler.zero(1))
    l1 = [s for s in d.states if "l1" in d.labels[s]]
    p0 = until_probability(d, ("h0both", 0), d.states, l1)
    p1 = until_probability(d, ("h1both", 0), d.states, l1)
    assert (p0, p1) == (Fraction(1, 2), Fraction(1, 4))
