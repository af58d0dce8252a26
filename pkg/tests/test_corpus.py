import itertools

import pytest

from permccs.corpus import (DERIVED_CASES, arr, build_quicksort, derived_case, encode_array,
                            gen_spec_formulas, ord_, quicksort_base_proof, quicksort_source,
                            veq)
from permccs.entail import formula_equiv
from permccs.logic import EMP
from permccs.parser import parse_formula
from permccs.printer import show
from permccs.proofs import OBLIGATION, check_proof, sequent_holds_semantically
from permccs.syntax import TRUE, eval_bool
from permccs.systems import Perm, certify_deterministic, owned_perms, parts


def test_encode_three_cells():
    s = encode_array([3, 1, 2])
    _, leaves = parts(s)
    cells = [leaf for leaf in leaves if leaf.perms and len(leaf.perms) == 1]
    assert len(leaves) == 4 and len(cells) == 3
    qck = [leaf for leaf in leaves if Perm("r", "!") in leaf.perms]
    assert qck[0].perms == {Perm("a1", "?"), Perm("a2", "?"), Perm("a3", "?"), Perm("r", "!")}
    assert owned_perms(s) == qck[0].perms | {Perm(f"a{k}", "!") for k in (1, 2, 3)}


def test_single_cell_signals_immediately():
    r = certify_deterministic(encode_array([7]), build_quicksort(1))
    assert show(r) == "a1!(7) | r!()"


def test_empty_array_rejected():
    with pytest.raises(ValueError):
        encode_array([])
    with pytest.raises(ValueError):
        quicksort_source(0)


def test_arr_empty_range():
    assert arr(3, 2) == EMP


def test_ord_singleton():
    assert ord_(["x1"]) == TRUE


def test_veq_singleton():
    assert veq(["x1"], ["y1"]) == TRUE


def test_spec_formulas_shape():
    cond, pre, post = gen_spec_formulas(1, 2)
    assert show(pre) == "a1 |-> x1 * a2 |-> x2"
    assert formula_equiv(post, parse_formula("a1 |-> y1 * a2 |-> y2 * r |-> ()"))
    strict, _, _ = gen_spec_formulas(1, 2, strict=True)
    for xs in itertools.product(range(3), repeat=2):
        for ys in itertools.product(range(3), repeat=2):
            sigma = {"x1": xs[0], "x2": xs[1], "y1": ys[0], "y2": ys[1]}
            # strictly: y is the sorted permutation of x
            assert eval_bool(strict, sigma) == (list(ys) == sorted(xs))
            # as written the last value is never compared, so the condition is weaker
            assert eval_bool(cond, sigma) >= eval_bool(strict, sigma)
    assert eval_bool(cond, {"x1": 0, "x2": 0, "y1": 0, "y2": 1})


def test_veq_strict_is_permutation():
    for xs in itertools.product(range(3), repeat=3):
        for ys in itertools.product(range(3), repeat=3):
            b = veq(["x1", "x2", "x3"], ["y1", "y2", "y3"], strict=True)
            sigma = {f"x{k + 1}": v for k, v in enumerate(xs)}
            sigma.update({f"y{k + 1}": v for k, v in enumerate(ys)})
            assert eval_bool(b, sigma) == (sorted(xs) == sorted(ys))


def test_quicksort_base_case_proof():
    defs, tree = quicksort_base_proof(1)
    res = check_proof(tree, defs)
    assert res.ok
    assert sequent_holds_semantically(res.sequent, defs, limit=6).status == "valid"


def test_quicksort_base_case_as_written_fails():
    # with the singleton case read as true the final value is unconstrained
    defs, tree = quicksort_base_proof(1, strict=False)
    res = check_proof(tree, defs)
    assert [(e.rule, e.kind) for e in res.errors] == [("lSub", OBLIGATION)]
    assert sequent_holds_semantically(res.sequent, defs, limit=8).status == "counterexample"


@pytest.mark.parametrize("rule", sorted(DERIVED_CASES))
def test_each_derived_rule_has_five_cases(rule):
    assert len(DERIVED_CASES[rule]) == 5
    assert rule in derived_case(rule, 0)
