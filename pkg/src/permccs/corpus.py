"""Worked examples: the filter/doubler program, in-place quicksort and its
specification macros, plus loaders for the files shipped under data/."""
import os

from .logic import DATA_MISMATCH, EMP, ENV_OBLIGATION, MISSING_PERMISSION, PermEnv, State, sep
from .parser import parse_env, parse_formula, parse_process, parse_system_file
from .syntax import And, Call, Lit, Not, Out, TRUE, Var, conj, eq, leq, or_
from .systems import Leaf, Perm, spar

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def data_path(name):
    return os.path.join(DATA_DIR, name)


def read_data(name):
    with open(data_path(name)) as fh:
        return fh.read()


def load_system(name, defs=None):
    """(DefTable, System) from a data file."""
    return parse_system_file(read_data(name), defs)


def load_process(name, defs=None):
    """(DefTable, Process) from a data file."""
    return parse_process(read_data(name), defs)


def build_prg():
    defs, _ = parse_process(read_data("prg.proc"))
    return defs


def prg_with_inputs(*values):
    """Prg | c1!v1 | c2!v2 | ... with the values sent alternately on c1 and c2,
    or on c1 only past the second value (the racy variant)."""
    defs = build_prg()
    chans = ["c1", "c2"] + ["c1"] * max(0, len(values) - 2)
    outs = " | ".join(f"{c}!({v})" for c, v in zip(chans, values))
    return parse_process(f"Prg() | {outs}", defs)


# satisfaction examples: expected verdict and, for failures, the class of reason
SATISFACTION_CASES = {
    "sat_split_inputs": ("Sat", None),
    "sat_single_leaf": ("Sat", None),
    "sat_already_stable": ("Sat", None),
    "unsat_input_lacks_output": ("Unsat", MISSING_PERMISSION),
    "unsat_program_lacks_input": ("Unsat", MISSING_PERMISSION),
    "unsat_signal_lacks_obligation": ("Unsat", ENV_OBLIGATION),
    "unsat_wrong_data": ("Unsat", DATA_MISMATCH),
    "sat_unscoped_blocked": ("Sat", None),
    "sat_large_input_any": ("Sat", None),
    "sat_any": ("Sat", None),
    "sat_two_blocked": ("Sat", None),
}


def satisfaction_case(name):
    """(env, defs, system, formula) of a satisfaction example."""
    defs, system = load_system(f"{name}.sys")
    return (parse_env(read_data(f"{name}.env")), defs, system,
            parse_formula(read_data(f"{name}.frm")))


NARRATIVES = ("narrative_program_signals.sys", "narrative_input_signals.sys")
FINAL_PERMS = ({"c1!", "c2?", "c2!"}, {"c1?", "c4!"})


# -- quicksort ----------------------------------------------------------------------------

def _cell(k):
    return f"a{k}"


def _idx_in(n, index, var, cont):
    """Input on a_index, dispatching on the value of the index expression."""
    out = "0"
    for k in range(n, 0, -1):
        out = f"if {index} = {k} then {_cell(k)}?({var}).({cont}) else {out}"
    return f"({out})"


def _idx_out(n, index, value):
    out = "0"
    for k in range(n, 0, -1):
        out = f"if {index} = {k} then {_cell(k)}!({value}) else {out}"
    return f"({out})"


def quicksort_source(n):
    """Definitions Qck, Prt and Trv over the cells a1..an."""
    if n < 1:
        raise ValueError("quicksort needs at least one cell")
    swap_pivot = _idx_in(n, "p", "y", f"{_idx_out(n, 'l', 'y')} | {_idx_out(n, 'p', 'x')} | r!(p)")
    swap_next = _idx_in(n, "p + 1", "z",
                        f"{_idx_out(n, 'c', 'z')} | {_idx_out(n, 'p + 1', 'y')} | "
                        "Trv(l, h, x, p + 1, c + 1)")
    step = (f"if x <= y then ({_idx_out(n, 'c', 'y')} | Trv(l, h, x, p, c + 1)) "
            f"else if c = p + 1 then ({_idx_out(n, 'c', 'y')} | Trv(l, h, x, p + 1, c + 1)) "
            f"else {swap_next}")
    trv = (f"def Trv(l, h, x, p, c) = if c > h then "
           f"(if l = p then ({_idx_out(n, 'l', 'x')} | r!(p)) else {swap_pivot}) "
           f"else {_idx_in(n, 'c', 'y', step)}")
    prt = f"def Prt(i, j) = {_idx_in(n, 'i', 'x', 'Trv(i, j, x, i, i + 1)')}"
    # j <= i rather than i = j: the recursive call Qck(i, i - 1) must stop too
    qck = ("def Qck(i, j) = if j <= i then r!() else new r3.(Prt(i, j)[r3/r] | "
           "r3?(x).new r1, r2.(Qck(i, x - 1)[r1/r] | Qck(x + 1, j)[r2/r] | r1?().r2?().r!()))")
    return "\n".join([qck, prt, trv])


_QCK = {}


def build_quicksort(n):
    """DefTable for quicksort over n cells a1..an."""
    if n not in _QCK:
        _QCK[n], _ = parse_process(quicksort_source(n))
    return _QCK[n]


def qck_perms(i, j, r="r"):
    return frozenset([Perm(_cell(k), "?") for k in range(i, j + 1)] + [Perm(r, "!")])


def encode_array(values):
    """Cells <{ak!}> ak!(vk) in parallel with <{a1?..an?, r!}> Qck(1, n)."""
    values = list(values)
    if not values:
        raise ValueError("cannot encode an empty array")
    n = len(values)
    defs = build_quicksort(n)
    _, main = parse_process(f"Qck(1, {n})", defs)
    cells = [Leaf({Perm(_cell(k), "!")}, parse_process(f"{_cell(k)}!({v})")[1])
             for k, v in enumerate(values, 1)]
    return spar(*cells, Leaf(qck_perms(1, n), main))


def quicksort_instance(values):
    return build_quicksort(len(values)), encode_array(values)


# -- specification macros -------------------------------------------------------------------

def arr(i, j, var="x", chan=_cell):
    """a_i |-> x_i * ... * a_j |-> x_j, or emp when i > j."""
    if i > j:
        return EMP
    return sep(*[State(chan(k), [Var(f"{var}{k}")]) for k in range(i, j + 1)])


def ord_(names):
    if len(names) <= 1:
        return TRUE
    return conj(*[leq(Var(a), Var(b)) for a, b in zip(names, names[1:])])


def veq(xs, ys, strict=False):
    """ys is a permutation of xs, by the disjunctive recursion on the head of xs.

    Singleton lists are taken as equal without comparing them, as in the macro
    being transcribed, unless strict is set; then they must hold equal values.
    """
    if len(xs) != len(ys):
        raise ValueError("veq needs lists of equal length")
    if not xs:
        return TRUE
    if len(xs) == 1:
        return eq(Var(ys[0]), Var(xs[0])) if strict else TRUE
    out = None
    for k in range(len(ys)):
        case = conj(eq(Var(ys[k]), Var(xs[0])), veq(xs[1:], ys[:k] + ys[k + 1:], strict))
        out = case if out is None else or_(out, case)
    return out


def gen_spec_formulas(i, j, vars=("x", "y"), strict=False):
    """(condition, precondition, postcondition) of the sorting specification."""
    x, y = vars
    xs = [f"{x}{k}" for k in range(i, j + 1)]
    ys = [f"{y}{k}" for k in range(i, j + 1)]
    cond = conj(ord_(ys), veq(xs, ys, strict))
    return cond, arr(i, j, x), sep(arr(i, j, y), State("r", []))


def qck_env(i, j, r="r", extra=()):
    """Cells guarded by their own output permission and r by E(r, i, j)."""
    m = {_cell(k): {Perm(_cell(k), "!")} for k in range(i, j + 1)}
    m[r] = qck_perms(i, j, r)
    for c, perms in extra:
        m[c] = perms
    return PermEnv(m)


def quicksort_base_proof(k, n=None, strict=True):
    """Proof tree for the sorting sequent of Qck(k, k): the conditional takes
    its signalling branch, lSub swaps the final values for the initial ones,
    and lFrmSt frames the array around the signal.

    With the macro read as written (strict=False) the lSub obligation
    y_k = x_k cannot be discharged and the tree is rejected.
    """
    from .proofs import ProofTree, Sequent
    n = n or k
    defs = build_quicksort(n)
    cond, pre, post = gen_spec_formulas(k, k, strict=strict)
    env = qck_env(k, k)
    perms = qck_perms(k, k)
    call = Call("Qck", [Lit(k), Lit(k)], defs["Qck"].formals)
    body = defs["Qck"].instantiate(call.args, call.chans)
    sig = Leaf(perms, Out("r", []))
    xk, yk = f"x{k}", f"y{k}"

    def seq(c, p, s, q):
        return Sequent(env, c, p, s, q)

    out = ProofTree("lOut", seq(cond_then(cond, body), EMP, sig, State("r", [])))
    frm = ProofTree("lFrmSt", seq(out.conclusion.cond, pre, sig, sep(pre, State("r", []))),
                    {"frame": pre}, [out])
    sub = ProofTree("lSub", seq(out.conclusion.cond, pre, sig, post),
                    {"var": yk, "expr": Var(xk)}, [frm])
    fls = ProofTree("lFls", seq(And(cond, Not(body.cond)), pre, Leaf(perms, body.else_), post))
    branch = ProofTree("lIf", seq(cond, pre, Leaf(perms, body), post), {}, [sub, fls])
    return defs, ProofTree("lDef", seq(cond, pre, Leaf(perms, call), post), {}, [branch])


def cond_then(cond, body):
    return And(cond, body.cond)


# -- derived-rule cases -------------------------------------------------------------------------

_G = '(define G "c : {c!}; d : {d!}; e : {e!}; f : {f!}")\n'

DERIVED_CASES = {
    "lCut": [
        """(lCut :env "$G" :cond "true" :pre "emp" :post "d |-> 1"
                :sys "<c!>{ c!(1) } || <c?, d!>{ c?(x).d!(x) }"
             (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
             (lIn :pre "c |-> 1" :sys "<c?, d!>{ c?(x).d!(x) }"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(1) }")))""",
        """(lCut :env "$G" :cond "0 <= x" :pre "emp" :post "d |-> (x + 1)"
                :sys "<c!>{ c!(x) } || <c?, d!>{ c?(y).d!(y + 1) }"
             (lOut :post "c |-> x" :sys "<c!>{ c!(x) }")
             (lIn :pre "c |-> x" :sys "<c?, d!>{ c?(y).d!(y + 1) }"
                  (lOut :pre "emp" :sys "<c?, c!, d!>{ d!(x + 1) }")))""",
        """(lCut :env "$G" :cond "true" :pre "emp" :post "d |-> 3"
                :sys "<c!>{ c!(1) } || <e!>{ e!(2) } || <c?, e?, d!>{ c?(x).e?(y).d!(x + y) }"
             (lSepSt :post "c |-> 1 * e |-> 2" :sys "<c!>{ c!(1) } || <e!>{ e!(2) }"
                     (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
                     (lOut :post "e |-> 2" :sys "<e!>{ e!(2) }"))
             (lIn :chan c :pre "c |-> 1 * e |-> 2" :sys "<c?, e?, d!>{ c?(x).e?(y).d!(x + y) }"
                  (lIn :pre "e |-> 2" :sys "<c?, e?, d!>{ e?(y).d!(1 + y) }"
                       (lOut :pre "emp" :sys "<c?, e?, d!>{ d!(1 + 2) }"))))""",
        """(lCut :env "$G" :cond "true" :pre "emp" :post "blk d"
                :sys "<c!>{ c!(2) } || <c?, d?>{ c?(x).d?(z).0 }"
             (lOut :post "c |-> 2" :sys "<c!>{ c!(2) }")
             (lIn :pre "c |-> 2" :sys "<c?, d?>{ c?(x).d?(z).0 }"
                  (lBlk :pre "emp" :sys "<c?, d?>{ d?(z).0 }")))""",
        """(lCut :env "$G" :cond "x <= 9" :pre "emp" :post "d |-> x"
                :sys "<c!>{ c!(x) } || <c?, d!>{ c?(y).if y <= 9 then d!(y) else d!(0) }"
             (lOut :post "c |-> x" :sys "<c!>{ c!(x) }")
             (lIn :pre "c |-> x" :sys "<c?, d!>{ c?(y).if y <= 9 then d!(y) else d!(0) }"
                  (lIf :pre "emp" :sys "<c?, d!>{ if x <= 9 then d!(x) else d!(0) }"
                       (lOut :cond "x <= 9 and x <= 9" :sys "<c?, d!>{ d!(x) }")
                       (lFls :cond "x <= 9 and not x <= 9" :sys "<c?, d!>{ d!(0) }"))))""",
    ],
    "lSep": [
        """(lSep :env "$G" :cond "true" :pre "emp" :post "c |-> 1 * d |-> 2"
                :sys "<c!>{ c!(1) } || <d!>{ d!(2) }"
             (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
             (lOut :post "d |-> 2" :sys "<d!>{ d!(2) }"))""",
        """(lSep :env "$G" :cond "true" :pre "emp" :post "c |-> 1 * blk d"
                :sys "<c!>{ c!(1) } || <d?>{ d?(x).0 }"
             (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
             (lBlk :post "blk d" :sys "<d?>{ d?(x).0 }"))""",
        """(lSep :env "$G" :cond "true" :pre "c |-> 4" :post "d |-> 4 * e |-> 3"
                :sys "<c?, d!>{ c?(x).d!(x) } || <e!>{ e!(3) }"
             (lIn :post "d |-> 4" :sys "<c?, d!>{ c?(x).d!(x) }"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(4) }"))
             (lOut :pre "emp" :post "e |-> 3" :sys "<e!>{ e!(3) }"))""",
        """(lSep :env "$G" :cond "0 <= x" :pre "emp" :post "c |-> x * d |-> (x + 1)"
                :sys "<c!>{ c!(x) } || <d!>{ d!(x + 1) }"
             (lOut :post "c |-> x" :sys "<c!>{ c!(x) }")
             (lOut :post "d |-> (x + 1)" :sys "<d!>{ d!(x + 1) }"))""",
        """(lSep :env "$G" :cond "true" :pre "emp" :post "blk c * blk d"
                :sys "<c?>{ c?(x).0 } || <d?>{ d?(y).0 }"
             (lBlk :post "blk c" :sys "<c?>{ c?(x).0 }")
             (lBlk :post "blk d" :sys "<d?>{ d?(y).0 }"))""",
    ],
    "lSepSt": [
        """(lSepSt :env "$G" :cond "true" :pre "emp" :post "c |-> 1 * d |-> 2"
                  :sys "<c!>{ c!(1) } || <d!>{ d!(2) }"
             (lOut :post "c |-> 1" :sys "<c!>{ c!(1) }")
             (lOut :post "d |-> 2" :sys "<d!>{ d!(2) }"))""",
        """(lSepSt :env "$G" :cond "true" :pre "c |-> 4" :post "d |-> 4 * e |-> 3"
                  :sys "<c?, d!>{ c?(x).d!(x) } || <e!>{ e!(3) }"
             (lIn :post "d |-> 4" :sys "<c?, d!>{ c?(x).d!(x) }"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(4) }"))
             (lOut :pre "emp" :post "e |-> 3" :sys "<e!>{ e!(3) }"))""",
        """(lSepSt :env "$G" :cond "0 <= x" :pre "emp" :post "c |-> x * d |-> (x + 1)"
                  :sys "<c!>{ c!(x) } || <d!>{ d!(x + 1) }"
             (lOut :post "c |-> x" :sys "<c!>{ c!(x) }")
             (lOut :post "d |-> (x + 1)" :sys "<d!>{ d!(x + 1) }"))""",
        """(lSepSt :env "$G" :cond "true" :pre "emp" :post "c |-> (1, 2) * d |-> ()"
                  :sys "<c!>{ c!(1, 2) } || <d!>{ d!() }"
             (lOut :post "c |-> (1, 2)" :sys "<c!>{ c!(1, 2) }")
             (lOut :post "d |-> ()" :sys "<d!>{ d!() }"))""",
        """(lSepSt :env "$G" :cond "true" :pre "c |-> 1 * e |-> 2" :post "d |-> 1 * f |-> 4"
                  :sys "<c?, d!>{ c?(x).d!(x) } || <e?, f!>{ e?(y).f!(y + y) }"
             (lIn :pre "c |-> 1" :post "d |-> 1" :sys "<c?, d!>{ c?(x).d!(x) }"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(1) }"))
             (lIn :pre "e |-> 2" :post "f |-> 4" :sys "<e?, f!>{ e?(y).f!(y + y) }"
                  (lOut :pre "emp" :sys "<e?, f!>{ f!(2 + 2) }")))""",
    ],
    "lOutD": [
        """(lOutD :env "$G" :cond "x = 3" :pre "emp" :post "c |-> 3" :sys "<c!>{ c!(x) }")""",
        """(lOutD :env "$G" :cond "x = y" :pre "emp" :post "c |-> y" :sys "<c!>{ c!(x) }")""",
        """(lOutD :env "$G" :cond "x = 1 and y = 2" :pre "emp" :post "c |-> (1, 2)"
                 :sys "<c!>{ c!(x, y) }")""",
        """(lOutD :env "$G" :cond "x + 1 = y" :pre "emp" :post "c |-> y"
                 :sys "<c!, d!>{ c!(x + 1) }")""",
        """(lOutD :env "$G" :cond "true" :pre "emp" :post "d |-> ()" :sys "<d!>{ d!() }")""",
    ],
    "lInD": [
        """(lInD :env "$G" :cond "true" :pre "c |-> 1" :post "d |-> 1"
                :sys "<c?, d!>{ c?(x).d!(x) }"
             (lOut :pre "emp" :sys "<c?, d!>{ d!(1) }"))""",
        """(lInD :env "$G" :cond "true" :pre "c |-> (1, 2)" :post "d |-> (2, 1)"
                :sys "<c?, d!>{ c?(x, y).d!(y, x) }"
             (lOut :pre "emp" :sys "<c?, d!>{ d!(2, 1) }"))""",
        """(lInD :env "$G" :cond "true" :pre "c |-> 1" :post "emp" :sys "<c?>{ c?(x).0 }"
             (lNil :pre "emp" :sys "<c?>{ 0 }"))""",
        """(lInD :env "$G" :cond "0 <= x" :pre "c |-> x" :post "d |-> x"
                :sys "<c?, d!>{ c?(y).d!(y) }"
             (lOut :pre "emp" :sys "<c?, c!, d!>{ d!(x) }"))""",
        """(lInD :env "$G" :cond "true" :pre "c |-> 7" :post "blk d"
                :sys "<c?, d?>{ c?(x).d?(y).0 }"
             (lBlk :pre "emp" :sys "<c?, d?>{ d?(y).0 }"))""",
    ],
    "lFrm": [
        """(lFrm :env "$G" :cond "true" :pre "d |-> 2" :post "c |-> 1 * d |-> 2" :frame "d |-> 2"
                :sys "<c!>{ c!(1) }"
             (lOut :pre "emp" :post "c |-> 1"))""",
        """(lFrm :env "$G" :cond "true" :pre "blk d" :post "c |-> 1 * blk d"
                :sys "<c!>{ c!(1) }"
             (lOut :pre "emp" :post "c |-> 1"))""",
        """(lFrm :env "$G" :cond "true" :pre "c |-> 1 * e |-> 5" :post "d |-> 1 * e |-> 5"
                :frame "e |-> 5" :sys "<c?, d!>{ c?(x).d!(x) }"
             (lIn :pre "c |-> 1" :post "d |-> 1"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(1) }")))""",
        """(lFrm :env "$G" :cond "true" :pre "c |-> 3" :post "blk d * c |-> 3"
                :sys "<d?>{ d?(x).0 }"
             (lBlk :pre "emp" :post "blk d"))""",
        """(lFrm :env "$G" :cond "true" :pre "c |-> 1" :post "c |-> 1" :frame "c |-> 1"
                :sys "<>{ 0 }"
             (lNil :pre "emp" :post "emp"))""",
    ],
    "lFrmSt": [
        """(lFrmSt :env "$G" :cond "true" :pre "d |-> 2" :post "c |-> 1 * d |-> 2"
                  :sys "<c!>{ c!(1) }"
             (lOut :pre "emp" :post "c |-> 1"))""",
        """(lFrmSt :env "$G" :cond "true" :pre "c |-> 1 * e |-> 5" :post "d |-> 1 * e |-> 5"
                  :frame "e |-> 5" :sys "<c?, d!>{ c?(x).d!(x) }"
             (lIn :pre "c |-> 1" :post "d |-> 1"
                  (lOut :pre "emp" :sys "<c?, d!>{ d!(1) }")))""",
        """(lFrmSt :env "$G" :cond "true" :pre "c |-> 1" :post "c |-> 1" :frame "c |-> 1"
                  :sys "<>{ 0 }"
             (lNil :pre "emp" :post "emp"))""",
        """(lFrmSt :env "$G" :cond "true" :pre "d |-> (x, 1)" :post "c |-> x * d |-> (x, 1)"
                  :sys "<c!>{ c!(x) }"
             (lOut :pre "emp" :post "c |-> x"))""",
        """(lFrmSt :env "$G" :cond "true" :pre "d |-> 1 * e |-> 2" :post "c |-> 0 * d |-> 1 * e |-> 2"
                  :frame "d |-> 1 * e |-> 2" :sys "<c!>{ c!(0) }"
             (lOut :pre "emp" :post "c |-> 0"))""",
    ],
}


def derived_case(rule, k):
    """Script text of the k-th coherence case for a derived rule."""
    return _G + DERIVED_CASES[rule][k]
