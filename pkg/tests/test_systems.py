import pytest
from hypothesis import given

from conftest import processes
from permccs.corpus import build_prg, build_quicksort, encode_array, load_system
from permccs.errors import CapExceeded, NotWellResourced
from permccs.parser import parse_process, parse_system
from permccs.printer import show
from permccs.process import canon
from permccs.syntax import NIL, DefTable, Par
from permccs.systems import (Leaf, Perm, SNew, SPar, canon_sys, certify_deterministic,
                             erase, evaluate_safe, has_violation, is_safely_stable,
                             owned_perms, perm_set, quaseq, separate, split_perms, sys_step,
                             sys_step_labeled, well_resourced)

EMPTY = DefTable()
PRG = build_prg()


def sys(text, defs=PRG):
    return parse_system(text, defs)


def final_stable_system():
    return sys("<c1!, c2?, c2!>{ c1!(2, 4) } || <c1?, c4!>{ c4!() }")


def test_owned_by_program_leaf():
    assert owned_perms(sys("<c1?, c2?, c4!>{ Prg() }")) == perm_set(["c1?", "c2?", "c4!"])


def test_owned_under_restriction():
    s = SNew("c", Leaf(perm_set(["c?", "c!", "d!"]), NIL))
    assert owned_perms(s) == {Perm("d", "!")}


def test_owned_unit():
    assert owned_perms(sys("<>{ 0 }")) == frozenset()


def test_separate_polarities():
    assert separate(sys("<c1?>{ 0 }"), sys("<c1!>{ 0 }"))


def test_program_cannot_share_input_permission():
    prog = sys("<c1?, c2?, c4!>{ Prg() }")
    env = sys("<c1!, c2!, c1?>{ c1!(1) | c2!(5) | c1?(x).0 }")
    assert not separate(prog, env)
    with pytest.raises(NotWellResourced):
        SPar(prog, env)


def test_separate_from_unit():
    assert separate(sys("<c1?, c2?, c4!>{ Prg() }"), sys("<>{ 0 }"))


def test_violation_missing_output_permission():
    assert has_violation(sys("<>{ c1!(2) }")) is not None


def test_no_violation_with_permission():
    assert has_violation(sys("<c!>{ c!(1) }")) is None


def test_composite_leaf_is_not_a_violation():
    # the violation rules only look at a leaf holding exactly one output or input
    assert has_violation(sys("<c!>{ c!(1) | d!(2) }")) is None


def test_erase_leaf():
    p = parse_process("c!(1) | d?(x).0")[1]
    assert erase(Leaf(perm_set(["c!"]), p)) == p


def test_erase_homomorphic():
    s = sys("new c.(<c!>{ c!(1) } || <c?>{ c?(x).0 })")
    assert canon(erase(s)) == canon(parse_process("new c.(c!(1) | c?(x).0)")[1])


def test_erase_final_system():
    assert show(canon(erase(final_stable_system()))) == "c1!(2, 4) | c4!()"


def test_quaseq_ignores_permissions():
    p = parse_process("c!(1)")[1]
    assert quaseq(Leaf(perm_set(["c!"]), p), Leaf(frozenset(), p))


def test_quaseq_respects_confinement():
    whole = sys("<a!, b!>{ a!() | b!() }")
    split = sys("<a!>{ a!() } || <b!>{ b!() }")
    assert not quaseq(whole, split)


def test_quaseq_reflexive():
    s = sys("<c1?, c2?, c4!>{ Prg() } || <c1!>{ c1!(2) }")
    assert quaseq(s, s)


def test_local_restriction_step():
    before = sys("<c1?, c2?, c4!>{ new c3.(Fltr() | Dbl()) } || <c1!>{ c1!(2) } || <c2!>{ c2!(5) }")
    after = sys("new c3.(<c1?, c2?, c3?, c3!, c4!>{ Fltr() | Dbl() } || <c1!>{ c1!(2) } "
                "|| <c2!>{ c2!(5) })")
    labeled = sys_step_labeled(before, PRG)
    assert ("cLcl", canon_sys(after)) in {(r, t) for r, _, t in labeled}


def test_communication_needs_receiver_permission():
    s = sys("<c!>{ c!(1) } || <>{ c?(x).0 }", EMPTY)
    assert not [r for r, _, _ in sys_step_labeled(s, EMPTY) if r == "cCom"]


def test_communication_transfers_sender_permissions():
    s = sys("<c!, d!>{ c!(1) } || <c?>{ c?(x).d!(x) }", EMPTY)
    (t,) = [t for r, _, t in sys_step_labeled(s, EMPTY) if r == "cCom"]
    assert t == canon_sys(sys("<c!, c?, d!>{ d!(1) }", EMPTY))


def test_split_enumerates_all_partitions():
    s = sys("<a!, b!>{ a!() | b!() }", EMPTY)
    splits = [t for r, _, t in sys_step_labeled(s, EMPTY) if r == "cSpl"]
    assert len(splits) == 4 == len(set(splits))


def test_split_cap():
    perms = perm_set([f"c{k}!" for k in range(5)])
    with pytest.raises(CapExceeded):
        list(split_perms(perms, cap=4))


def test_final_system_safely_stable():
    assert is_safely_stable(final_stable_system(), PRG)


def test_communicating_pair_not_stable():
    assert not is_safely_stable(sys("<c!>{ c!(1) } || <c?>{ c?(x).0 }", EMPTY), EMPTY)


def test_violating_output_not_stable():
    assert not is_safely_stable(sys("<>{ d!(1) }", EMPTY), EMPTY)


def test_alternative_narrative():
    defs, s = load_system("narrative_input_signals.sys")
    res = evaluate_safe(s, defs)
    assert res is not None
    assert show(canon(erase(res.system))) == "c1!(2, 4) | c4!()"


def test_violation_has_no_narrative():
    assert evaluate_safe(sys("<>{ c!(1) }", EMPTY), EMPTY) is None


def test_quicksort_narrative_three_cells():
    assert show(certify_deterministic(encode_array([3, 1, 2]), build_quicksort(3))) == \
        "a1!(1) | a2!(2) | a3!(3) | r!()"


def test_unit_certifies_nil():
    assert certify_deterministic(sys("<>{ 0 }", EMPTY), EMPTY) == canon(NIL)


def test_trace_steps_are_reductions():
    defs, s = load_system("narrative_program_signals.sys")
    res = evaluate_safe(s, defs)
    prev = canon_sys(s)
    for st in res.trace:
        assert st.system in sys_step(prev, defs)
        prev = st.system


@given(processes(closed=True, max_leaves=5), processes(closed=True, max_leaves=5))
def test_well_resourced_by_construction(p, q):
    s = SPar(Leaf(perm_set(["c!"]), p), Leaf(perm_set(["c?", "d!"]), q))
    assert well_resourced(s)
    with pytest.raises(NotWellResourced):
        SPar(s, Leaf(perm_set(["d!"]), Par(p, q)))
