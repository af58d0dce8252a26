import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bools
from permccs.corpus import DATA_DIR, build_prg
from permccs.entail import (Refuted, Valid, bool_entails, bool_entails_bruteforce,
                            formula_implies)
from permccs.errors import TooManyVariables
from permccs.logic import EMP, PermEnv
from permccs.parser import parse_bool, parse_formula, parse_process, parse_sequent
from permccs.proofs import (CUT_SHAPE, PERMISSION, SEPARATION, check_proof, iter_nodes,
                            load_script, load_script_file, node_at, process_sequent_holds,
                            sequent_holds_semantically)
from permccs.syntax import Var, fv_bool
from permccs.systems import perm_set

B, F = parse_bool, parse_formula


def script(body, env="c : {c!}"):
    return load_script(f'(define G "{env}")\n(proof {body})', base_dir=DATA_DIR)


def test_contradiction_entails_false():
    assert isinstance(bool_entails(B("x <= 9 and not x <= 9"), B("false")), Valid)


def test_doubling_identity():
    assert isinstance(bool_entails(B("true"), B("x + x = 2 + x + x - 2")), Valid)


def test_entailment_refuted_with_witness():
    v = bool_entails(B("x <= 5"), B("x <= 3"))
    assert isinstance(v, Refuted) and v.sigma["x"] in (4, 5)


def test_too_many_variables():
    b = B(" and ".join(f"v{k} <= 1" for k in range(7)))
    with pytest.raises(TooManyVariables):
        bool_entails(b, b)


ENTAIL_EXPRS = st.sampled_from(["x", "y", "x + y", "x - 1", "0", "3", "y + y"])


@given(st.lists(st.tuples(ENTAIL_EXPRS, ENTAIL_EXPRS, st.booleans()), min_size=1, max_size=2),
       st.tuples(ENTAIL_EXPRS, ENTAIL_EXPRS, st.booleans()))
def test_entailment_agrees_with_bruteforce(hyps, goal):
    def atom(a, b, neg):
        return f"{'not ' if neg else ''}{a} <= {b}"
    b1 = B(" and ".join(atom(*h) for h in hyps))
    b2 = B(atom(*goal))
    v = bool_entails(b1, b2, bound=6)
    brute = bool_entails_bruteforce(b1, b2, 6)
    if isinstance(v, Refuted):
        assert brute is not None
    else:
        assert brute is None


def test_unit_law():
    f = F("c |-> 1")
    assert formula_implies(F("emp * c |-> 1"), f) and formula_implies(f, F("emp * c |-> 1"))


def test_associativity():
    assert formula_implies(F("a |-> 1 * (b |-> 2 * blk c)"), F("(a |-> 1 * b |-> 2) * blk c"))


def test_conservative_rejection():
    assert not formula_implies(F("c |-> 1"), F("c |-> 2"))
    assert formula_implies(F("c |-> 1"), F("any"))


def test_output_with_environment_permissions():
    _, t = script('(lOut :env "c1 : {c1!}; c3 : {c3!, c1!}" :cond "true" :pre "emp" '
                  ':post "c3 |-> x" :sys "<c1!, c3!>{ c3!(x) }")')
    assert check_proof(t).ok


def test_output_missing_environment_permission():
    _, t = script('(lOut :env "c1 : {c1!}; c3 : {c3!, c1!}" :cond "true" :pre "emp" '
                  ':post "c3 |-> x" :sys "<c3!>{ c3!(x) }")')
    (err,) = check_proof(t).errors
    assert err.kind == PERMISSION and err.path == "root"


def test_blocked_input_owned():
    _, t = script('(lBlk :env "$G" :cond "true" :pre "emp" :post "blk c3" '
                  ':sys "<c2?, c3?, c2!>{ c3?(x4).c1!(x4 + x4) }")',
                  env="c1 : {c1!}; c2 : {c2!}; c3 : {c3!}")
    assert check_proof(t).ok


def test_parallel_separation_failure():
    # the left post c |-> 1 would unblock the right post blk c
    _, t = script('''(lPar :env "$G" :cond "true" :pre "emp" :post "c |-> 1 * blk c"
                       :sys "<c!>{ c!(1) } || <c?>{ c?(x).0 }"
                       (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
                       (lBlk :sys "<c?>{ c?(x).0 }" :post "blk c"))''')
    errs = check_proof(t).errors
    assert [e.kind for e in errs] == [SEPARATION]


def test_parallel_cut_shape():
    _, t = script('''(lPar :env "$G" :cond "true" :pre "emp" :post "emp" :cut "c |-> 2"
                       :sys "<c!>{ c!(1) } || <>{ 0 }"
                       (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
                       (lNil :pre "c |-> 2" :post "c |-> 2" :sys "<>{ 0 }"))''')
    assert CUT_SHAPE in {e.kind for e in check_proof(t).errors}


def test_mutated_signal_leaf_rejected_there():
    text = open(os.path.join(DATA_DIR, "prg_small_input.proof")).read()
    bad = text.replace('(lOut :post "c4 |-> ()" :sys "<c1?, c4!>{ c4!() }")',
                       '(lOut :post "c4 |-> ()" :sys "<c4!>{ c4!() }")')
    assert bad != text
    defs, t = load_script(bad, base_dir=DATA_DIR)
    res = check_proof(t, defs)
    leaf = [p for p, n in iter_nodes(t) if n.rule == "lOut"
            and n.conclusion.post == F("c4 |-> ()")]
    assert leaf and leaf[0] in {e.path for e in res.errors if e.kind == PERMISSION}


def test_errors_name_paths():
    defs, t = load_script_file(os.path.join(DATA_DIR, "prg_large_input.proof"))
    res = check_proof(t, defs)
    assert res.ok
    for path, node in iter_nodes(t):
        assert node_at(t, path) is node


def test_program_sequent_at_sample_point():
    defs = build_prg()
    seq = parse_sequent(
        "env c1 : {c1!}; c2 : {c2!}; c4 : {c4!, c1?} ; bool x = 2 and y = 5 |- "
        "{ c1 |-> x * c2 |-> y } <c1?, c2?, c4!>{ Prg() } { c1 |-> (x, x + x) * c4 |-> () }",
        defs)
    r = sequent_holds_semantically(seq, defs)
    assert r.status == "valid" and r.points == 1 and r.contexts >= 1


def test_false_sequent_counterexample():
    seq = parse_sequent("env c : {c!} ; bool true |- { emp } <c!>{ c!(1) } { c |-> 2 }")
    r = sequent_holds_semantically(seq)
    assert r.status == "counterexample"
    sigma, t = r.counterexample
    assert sigma == {} and str(t) and t.perms == frozenset()


def test_process_sequent_reports_narrative():
    defs = build_prg()
    env = PermEnv({"c1": {"c1!"}, "c2": {"c2!"}, "c4": {"c4!", "c1?"}})
    wrong = (env, perm_set(["c1?", "c2?"]))
    right = (env, perm_set(["c1?", "c2?", "c4!"]))
    _, prg = parse_process("Prg()", defs)
    narrative, r = process_sequent_holds(B("x = 2"), F("c1 |-> x * c2 |-> y"), prg,
                                         F("c1 |-> (x, x + x) * c4 |-> ()"), [wrong, right],
                                         defs, limit=2)
    assert narrative == right and r.status == "valid"


@pytest.mark.parametrize("name", ["prg_small_input.proof", "prg_large_input.proof", "lnil.proof", "qsort_join.proof"])
def test_accepted_proofs_are_semantically_valid(name):
    defs, t = load_script_file(os.path.join(DATA_DIR, name))
    res = check_proof(t, defs)
    assert res.ok
    assert sequent_holds_semantically(res.sequent, defs, limit=6).status == "valid"


def test_empty_precondition_frame():
    _, t = script('(lNil :env "$G" :cond "true" :pre "emp" :post "emp" :sys "<>{ 0 }")')
    assert check_proof(t).ok and t.conclusion.pre == EMP


@given(bools())
def test_entailment_reflexive(b):
    if len(fv_bool(b)) <= 3:
        assert not isinstance(bool_entails(b, b), Refuted)
    assert Var("x") is Var("x")
