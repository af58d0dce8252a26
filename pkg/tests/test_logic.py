import pytest
from hypothesis import given
from hypothesis import strategies as st

from permccs.corpus import build_prg, satisfaction_case
from permccs.errors import OpenFormula
from permccs.logic import (ANY, EMP, PermEnv, Sat, Unknown, Unsat, edges, env_restrict,
                           env_wellformed, formula_restrict, formulas_separate,
                           is_state_formula, semantic_implies_bruteforce, satisfies, sep,
                           triggers)
from permccs.parser import parse_env, parse_formula, parse_system
from permccs.syntax import DefTable
from permccs.systems import Perm, canon_sys, sys_step

EMPTY = DefTable()
GAMMA = {"c1": {"c1!"}, "c2": {"c2!"}, "c4": {"c4!", "c1?"}}
F = parse_formula


def test_example_environment_wellformed():
    assert env_wellformed(GAMMA)


def test_env_self_input_rejected():
    assert not env_wellformed({"c": {"c?"}})


def test_env_names_outside_domain_rejected():
    assert not env_wellformed({"c": {"c!", "d!"}})


def test_data_mismatch_unsat():
    g, defs, s, f = satisfaction_case("unsat_wrong_data")
    v = satisfies(g, s, f, defs)
    assert isinstance(v, Unsat)


def test_emp_on_unit():
    assert isinstance(satisfies(PermEnv(), parse_system("<>{ 0 }"), EMP, EMPTY), Sat)


def test_open_formula_rejected():
    with pytest.raises(OpenFormula):
        satisfies(PermEnv(), parse_system("<>{ 0 }"), F("c |-> x"), EMPTY)


def test_budget_gives_unknown():
    defs = build_prg()
    s = parse_system("<c1?, c2?, c4!>{ Prg() } || <c1!>{ c1!(2) } || <c2!>{ c2!(5) }", defs)
    v = satisfies(parse_env("c1 : {c1!}; c2 : {c2!}; c4 : {c4!, c1?}"), s,
                  F("c1 |-> (2, 4) * c4 |-> ()"), defs, budget=2)
    assert isinstance(v, Unknown) and not v


def test_blk_clause():
    g = parse_env("c : {c!}")
    s = parse_system("<c?>{ c?(x).0 }")
    assert isinstance(satisfies(g, s, F("blk c"), EMPTY), Sat)
    # the blocked channel must be known to the environment
    assert isinstance(satisfies(PermEnv(), s, F("blk c"), EMPTY), Unsat)


def test_state_edges():
    f = F("c |-> (1)")
    assert edges(f) == {Perm("c", "!")} and triggers(f) == frozenset()


def test_blk_triggers():
    assert triggers(F("blk c")) == {Perm("c", "!")} and edges(F("blk c")) == frozenset()


def test_any_undefined():
    assert edges(ANY) is None and triggers(ANY) is None


def test_separate_output_from_other_block():
    assert formulas_separate(F("c4 |-> x"), F("blk c3"))


def test_unstable_composition_not_separate():
    assert not formulas_separate(F("c |-> 1"), F("blk c"))


def test_any_is_not_separate_from_a_block():
    assert not formulas_separate(ANY, F("blk c"))


ATOMS = st.sampled_from(["emp", "c |-> 1", "d |-> (2, 3)", "e |-> ()"])


@given(st.lists(ATOMS, min_size=1, max_size=3), st.lists(ATOMS, min_size=1, max_size=3))
def test_state_formulas_always_separate(xs, ys):
    f, g = F(" * ".join(xs)), F(" * ".join(ys))
    assert is_state_formula(f) and is_state_formula(g)
    assert formulas_separate(f, g)


def test_restrict_blocked_channel():
    assert formula_restrict(F("c4 |-> x * blk c3"), "c3") == F("c4 |-> x * any")


def test_restrict_untouched_post():
    f = F("c1 |-> (x, x + x) * c4 |-> ()")
    assert formula_restrict(f, "c3") == f


def test_restrict_emp():
    assert formula_restrict(EMP, ["c", "d"]) == EMP


def test_env_restrict_forgets_permissions():
    g = PermEnv({"c": {"c!"}, "d": {"d!", "c?"}})
    assert env_restrict(g, "c") == PermEnv({"d": {"d!"}})


def test_env_restrict_unmentioned():
    g = PermEnv({"d": {"d!"}})
    assert env_restrict(g, "c") == g


def test_env_restrict_recovers_example_environment():
    g2 = parse_env("c1 : {c1!}; c2 : {c2!}; c4 : {c4!, c1?}; c3 : {c3!, c1!}")
    assert env_restrict(g2, "c3") == PermEnv(GAMMA)


def test_unit_law_bounded_valid():
    f = F("c |-> 1")
    assert semantic_implies_bruteforce(sep(EMP, f), f).valid
    assert semantic_implies_bruteforce(f, sep(EMP, f)).valid


def test_commutativity_bounded_valid():
    f, g = F("c |-> 1"), F("blk d")
    assert semantic_implies_bruteforce(sep(f, g), sep(g, f), max_atoms=2).valid


def test_different_values_counterexample():
    r = semantic_implies_bruteforce(F("c |-> 1"), F("c |-> 2"))
    assert not r.valid
    env, s = r.counterexample
    assert isinstance(satisfies(env, s, F("c |-> 1"), EMPTY), Sat)


SMALL = st.sampled_from([
    "<c!>{ c!(1) }", "<c!>{ c!(1) } || <d?>{ d?(x).c!(x) }",
    "<c!, d!>{ d!(2) | d?(x).c!(x) }", "<d!, d?, c!>{ d!(1) | d?(x).c!(x + 1) }",
    "<c?>{ c?(x).0 } || <c!>{ c!(3) }", "new d.(<d!, d?, c!>{ d!(1) | d?(x).c!(x) })",
])
FORMULAS = st.sampled_from(["c |-> 1", "c |-> 2", "any", "emp", "blk c", "c |-> 1 * any"])


@given(SMALL, FORMULAS)
def test_satisfaction_stable_under_struct_eq(text, ftext):
    g = parse_env("c : {c!}; d : {d!}")
    s, f = parse_system(text), F(ftext)
    assert type(satisfies(g, canon_sys(s), f, EMPTY)) is type(satisfies(g, s, f, EMPTY))


@given(SMALL, FORMULAS)
def test_satisfaction_reflected_by_reduction(text, ftext):
    # a reduct that satisfies f means the original satisfies f too
    g = parse_env("c : {c!}; d : {d!}")
    s, f = parse_system(text), F(ftext)
    for t in sys_step(s, EMPTY):
        if isinstance(satisfies(g, t, f, EMPTY), Sat):
            assert isinstance(satisfies(g, s, f, EMPTY), Sat)


@given(SMALL, FORMULAS)
def test_sat_has_safely_stable_witness(text, ftext):
    g = parse_env("c : {c!}; d : {d!}")
    v = satisfies(g, parse_system(text), F(ftext), EMPTY)
    if isinstance(v, Sat):
        assert isinstance(satisfies(g, v.system, F(ftext), EMPTY), Sat)
