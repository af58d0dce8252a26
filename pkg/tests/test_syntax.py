import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bools, closed_exprs, exprs, small_ints
from permccs.corpus import build_quicksort
from permccs.errors import ArityMismatch, Overflow, UnboundVariable
from permccs.process import struct_eq
from permccs.syntax import (FALSE, INT_MAX, TRUE, Add, And, Call, In, Leq, Lit, New, Nil, Not,
                            Out, Par, Sub, Var, eval_bool, eval_expr, fn, fv, rename_channels,
                            subst_expr, substitute)


def test_eval_literal_difference():
    assert eval_expr(Sub(Lit(5), Lit(3))) == 2


def test_eval_variable_lookup():
    assert eval_expr(Var("x"), {"x": 7}) == 7


def test_eval_doubling():
    assert eval_expr(Add(Var("x"), Var("x")), {"x": 2}) == 4


def test_eval_unbound_variable():
    with pytest.raises(UnboundVariable):
        eval_expr(Var("x"))


def test_eval_overflow_is_an_error():
    with pytest.raises(Overflow):
        eval_expr(Add(Lit(INT_MAX), Lit(1)))
    with pytest.raises(Overflow):
        Lit(INT_MAX + 1)


def test_eval_bool_guard_taken():
    assert eval_bool(Leq(Lit(2), Lit(9))) is True


def test_eval_bool_negated_false():
    assert eval_bool(Not(Leq(Lit(1), Lit(0)))) is True
    assert eval_bool(TRUE) and not eval_bool(FALSE)


def test_eval_bool_contradiction():
    b = Leq(Var("x"), Lit(9))
    assert eval_bool(And(b, Not(b)), {"x": 4}) is False


def test_substitute_output():
    p = Out("c1", (Var("x"), Add(Var("x"), Var("x"))))
    assert substitute(p, {"x": 2}) == Out("c1", (Lit(2), Add(Lit(2), Lit(2))))


def test_substitute_leaves_bound_variable():
    p = In("c", ("x",), Out("d", (Var("x"),)))
    assert substitute(p, {"x": 5}) == p


def test_substitute_free_and_bound_occurrence():
    p = Par(Out("d", (Var("y"),)), In("c", ("y",), Nil()))
    assert substitute(p, {"y": 1}) == Par(Out("d", (Lit(1),)), In("c", ("y",), Nil()))


def test_substitute_avoids_capture():
    # [y/x] under a binder for y must rename the binder
    p = In("c", ("y",), Out("d", (Var("x"), Var("y"))))
    q = substitute(p, {"x": Var("y")})
    assert isinstance(q, In) and q.params[0] != "y"
    assert fv(q) == {"y"}


def test_rename_quicksort_body():
    body = build_quicksort(2)["Qck"].body
    renamed = rename_channels(body, [("r3", "r")])
    assert "r" not in fn(renamed)
    assert "r3" in fn(renamed)
    assert struct_eq(rename_channels(renamed, [("r", "r3")]), body)


def test_rename_empty_is_identity():
    p = Par(Out("c", (Lit(1),)), In("d", ("x",), Nil()))
    assert rename_channels(p, []) == p


def test_rename_shielded_by_binder():
    p = New("c", Out("c", ()))
    q = rename_channels(p, [("d", "c")])
    assert struct_eq(q, p)
    assert fn(q) == frozenset()


def test_call_arity_checked():
    defs = build_quicksort(1)
    with pytest.raises(ArityMismatch):
        defs["Qck"].instantiate((Lit(1),), defs["Qck"].formals)


@given(exprs(), st.lists(small_ints, min_size=3, max_size=3))
def test_substitution_then_eval_matches_eval_in_extended_env(e, vals):
    # evaluating e under [v/x] equals evaluating e[e'/x] when e' evaluates to v
    sigma = dict(zip(("x", "y", "z"), vals))
    padded = {k: Add(Lit(v), Sub(Lit(0), Lit(0))) for k, v in sigma.items()}
    assert eval_expr(subst_expr(e, padded)) == eval_expr(e, sigma)


@given(bools(closed_exprs()))
def test_double_negation(b):
    assert eval_bool(Not(Not(b))) == eval_bool(b)


@given(st.lists(small_ints, min_size=2, max_size=2))
def test_substitution_composition(vals):
    p = Par(Out("c", (Add(Var("x"), Var("y")),)), In("d", ("z",), Out("e", (Var("x"), Var("z")))))
    s1, s2 = {"x": vals[0]}, {"y": vals[1]}
    assert substitute(substitute(p, s1), s2) == substitute(p, {**s1, **s2})


def test_call_nodes_hash_consed():
    assert Call("K", (1,), ()) is Call("K", (Lit(1),), ())
