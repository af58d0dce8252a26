from hypothesis import given

from conftest import processes
from permccs.corpus import build_prg, load_process, prg_with_inputs
from permccs.errors import BudgetExhausted
from permccs.parser import parse_process
from permccs.printer import show
from permccs.process import (Deterministic, Diverges, NonDeterministic, Unknown, canon,
                             evaluate, explore, is_deterministic, is_stable, step, step_labeled,
                             struct_eq)
from permccs.syntax import NIL, DefTable, In, Lit, New, Out, Par, Var, fn, substitute

import pytest

P = Out("d", (Lit(1),))
Q = In("c", ("x",), Out("e", (Var("x"),)))


def proc(text, defs=None):
    return parse_process(text, defs)[1]


def test_nil_unit():
    assert canon(Par(P, NIL)) == canon(P)


def test_restriction_of_nil():
    assert canon(New("c", NIL)) == canon(NIL)


def test_scope_extrusion():
    assert "c" not in fn(P)
    assert canon(Par(P, New("c", Q))) == canon(New("c", Par(P, Q)))


def test_scope_extrusion_side_condition():
    R = Out("c", (Lit(2),))
    assert canon(Par(R, New("c", Q))) != canon(New("c", Par(R, Q)))


def test_binder_order_irrelevant():
    body = Par(Out("c", ()), In("d", (), NIL))
    assert canon(New("c", New("d", body))) == canon(New("d", New("c", body)))


def test_communication_step():
    body = Out("e", (Var("x"), Lit(0)))
    p = Par(Out("c1", (Lit(4),)), In("c1", ("x",), body))
    assert step(p, DefTable()) == {canon(substitute(body, {"x": 4}))}


def test_then_branch_step():
    p = proc("if 2 <= 9 then a!() else b!()")
    assert step(p, DefTable()) == {canon(Out("a", ()))}


def test_race_has_competing_communications():
    defs, p = prg_with_inputs(1, 0, 3)
    g = explore(p, defs)
    racy = [n for n in g.edges
            if sum(rule == "rCom" for rule, _, _ in step_labeled(n, defs)) >= 2
            and len(step(n, defs)) >= 2]
    assert racy
    # two distinct c1 messages meet the same filter input
    n = racy[0]
    assert len({s for rule, _, s in step_labeled(n, defs) if rule == "rCom"}) >= 2


def test_evaluate_nil():
    assert evaluate(NIL, DefTable()) == {canon(NIL)}


def test_evaluate_results_are_stable():
    defs, p = prg_with_inputs(3, 5)
    for r in evaluate(p, defs):
        assert is_stable(r, defs)


def test_budget_exhausted_keeps_partial():
    defs, p = prg_with_inputs(1, 0, 3)
    with pytest.raises(BudgetExhausted) as exc:
        evaluate(p, defs, budget=3)
    assert exc.value.truncated


def test_deterministic_program():
    defs, p = prg_with_inputs(2, 5)
    v = is_deterministic(p, defs)
    assert isinstance(v, Deterministic)
    assert show(v.result) == "c1!(2, 4) | c4!()"


def test_race_is_nondeterministic():
    defs, p = load_process("race.proc")
    v = is_deterministic(p, defs)
    assert isinstance(v, NonDeterministic) and not struct_eq(v.first, v.second)


def test_race_leaves_by_hand():
    # Dbl runs once (one c2 output). Fltr's first pick decides what Dbl doubles,
    # its second pick is one of the two c1 outputs left over.
    #   picks 1: Dbl gives c1!(2); the rest is {3, 2}
    #   picks 3: Dbl gives c1!(6); the rest is {1, 6}
    defs, p = load_process("race.proc")
    want = {canon(proc(t)) for t in ("c4!() | c1!(1, 3) | c1!(2)", "c4!() | c1!(1, 2) | c1!(3)",
                                     "c4!() | c1!(3, 1) | c1!(6)", "c4!() | c1!(3, 6) | c1!(1)")}
    assert is_deterministic(p, defs).leaves == want


def test_self_loop_diverges():
    defs, p = parse_process("def Loop() = Loop()\nLoop()")
    assert isinstance(is_deterministic(p, defs), Diverges)


def test_budget_gives_unknown():
    defs, p = parse_process("def Up(n) = Up(n + 1)\nUp(0)")
    assert isinstance(is_deterministic(p, defs, budget=20), Unknown)


def test_prg_definitions():
    defs = build_prg()
    assert set(defs) == {"Prg", "Dbl", "Fltr"}
    assert canon(defs["Prg"].body) == canon(proc("new c3.(Fltr() | Dbl())", defs))
    d = defs["Dbl"].body
    assert (d.chan, d.body.chan) == ("c2", "c3")
    assert defs["Fltr"].body.body.else_ == Out("c4", (Var("x1"),))


@given(processes(), processes())
def test_struct_eq_congruence(p, q):
    assert struct_eq(Par(p, q), Par(q, p))
    assert struct_eq(Par(p, Par(q, NIL)), Par(Par(NIL, p), q))
    assert struct_eq(New("c", Par(p, q)), New("c", Par(q, p)))


@given(processes(), processes(), processes())
def test_struct_eq_associative(p, q, r):
    assert struct_eq(Par(p, Par(q, r)), Par(Par(p, q), r))


@given(processes())
def test_canon_idempotent(p):
    assert canon(canon(p)) == canon(p)
    assert struct_eq(p, canon(p))


@given(processes(closed=True), processes(closed=True))
def test_step_respects_struct_eq(p, q):
    defs = DefTable()
    assert step(Par(p, q), defs) == step(Par(q, Par(NIL, p)), defs)


@given(processes(closed=True, max_leaves=6))
def test_evaluation_leaves_stable(p):
    try:
        res = evaluate(p, DefTable(), budget=200)
    except BudgetExhausted:
        return
    assert res and all(not step(r, DefTable()) for r in res)
