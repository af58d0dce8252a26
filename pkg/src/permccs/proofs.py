"""Sequents, proof trees and the proof checker.

A proof is a tree of rule applications.  Every node carries its full conclusion
sequent plus whatever instantiation the rule needs (a cut formula, restricted
channels, a substitution, ...).  The checker validates each node against its
premises' conclusions and reports errors at the node where they occur.
"""
import itertools
import os
import re
from dataclasses import dataclass, field

from .entail import (DEFAULT_BOUND, DEFAULT_MAX_VARS, accepted, bool_entails,
                     formula_equiv, formula_implies, formula_minus)
from .errors import NotWellResourced, ParseError, PermCCSError, TooManyVariables
from .logic import (EMP, Blk, PermEnv, State, conjuncts, env_rename, env_restrict,
                    fn_formula, fold_formula, formula_restrict, formulas_separate,
                    is_state_formula, rename_formula, sep, show_env, show_formula,
                    subst_formula)
from .printer import show_bool
from .process import split_canon
from .syntax import (FALSE, NIL, New, And, Call, Nil, Par, DefTable, If, In, Not, Out, Var, conj, eq,
                     fold_bool, fv_bool, fresh_var, subst_bool, substitute)
from .systems import (SPar, Leaf, _lift_binder, canon_sys, leaf_atom, names, parts,
                      rebuild, rename_sys, sfn, show_system, snews, subst_sys,
                      well_resourced)

# error kinds
PREMISE_COUNT = "PremiseCountMismatch"
PERMISSION = "PermissionSideConditionFailed"
CUT_SHAPE = "CutShapeMismatch"
SEPARATION = "SeparationCheckFailed"
STRUCTURE = "NotStructurallyEqual"
FORMULA = "FormulaMismatch"
CONDITION = "ConditionMismatch"
ENVIRONMENT = "EnvironmentMismatch"
OBLIGATION = "BooleanObligationFailed"
FRESHNESS = "FreshnessConditionFailed"
MALFORMED = "MalformedNode"
UNKNOWN_RULE = "UnknownRule"


@dataclass(frozen=True)
class Sequent:
    """env; cond |- {pre} sys {post}"""
    env: PermEnv
    cond: object
    pre: object
    sys: object
    post: object

    def __str__(self):
        return show_sequent(self)


def show_sequent(seq, defs=None):
    return (f"env {show_env(seq.env)} ; bool {show_bool(seq.cond)} |- "
            f"{{ {show_formula(seq.pre)} }} {show_system(seq.sys, defs)} "
            f"{{ {show_formula(seq.post)} }}")


@dataclass
class ProofTree:
    rule: str
    conclusion: Sequent
    inst: dict = field(default_factory=dict)
    premises: list = field(default_factory=list)
    line: int = 0


@dataclass(frozen=True)
class RuleError:
    path: str
    rule: str
    kind: str
    reason: str

    def __str__(self):
        return f"{self.path} [{self.rule}] {self.kind}: {self.reason}"


@dataclass
class CheckResult:
    sequent: object
    errors: list

    @property
    def ok(self):
        return not self.errors

    def __bool__(self):
        return self.ok


class _Fail(Exception):
    def __init__(self, kind, reason):
        super().__init__(reason)
        self.kind = kind
        self.reason = reason


# -- helpers --------------------------------------------------------------------------------

def _need(ok, kind, reason):
    if not ok:
        raise _Fail(kind, reason)


def _same_sys(a, b):
    return canon_sys(a) == canon_sys(b)


def _same_cond(a, b):
    return fold_bool(a) == fold_bool(b)


def _same_env(node, prem, what="premise"):
    _need(node.env == prem.env, ENVIRONMENT,
          f"{what} environment {show_env(prem.env)} differs from {show_env(node.env)}")


def _same_frame(node, prem, pre=True, post=True, cond=True, env=True):
    if env:
        _same_env(node, prem)
    if cond:
        _need(_same_cond(node.cond, prem.cond), CONDITION,
              f"premise condition {show_bool(prem.cond)} differs from {show_bool(node.cond)}")
    if pre:
        _need(formula_equiv(node.pre, prem.pre), FORMULA,
              f"premise precondition {show_formula(prem.pre)} differs from "
              f"{show_formula(node.pre)}")
    if post:
        _need(formula_equiv(node.post, prem.post), FORMULA,
              f"premise postcondition {show_formula(prem.post)} differs from "
              f"{show_formula(node.post)}")


def _sys_eq(expected, actual, what="premise system"):
    _need(_same_sys(expected, actual), STRUCTURE,
          f"{what} {show_system(actual)} is not structurally equal to {show_system(expected)}")


def _open_leaves(s):
    """Canonical binders, leaves, and indices of leaves that use no binder."""
    binders, leaves = parts(canon_sys(s))
    bset = set(binders)
    free = [i for i, leaf in enumerate(leaves)
            if not ((set(_leaf_names(leaf))) & bset)]
    return binders, leaves, free


def _leaf_names(leaf):
    from .syntax import fn
    return fn(leaf.proc) | names(leaf.perms)


def _entails(ctx, b1, b2, what):
    try:
        v = bool_entails(b1, b2, ctx.bound, ctx.max_vars)
    except TooManyVariables as exc:
        raise _Fail(OBLIGATION, f"{what}: {exc}")
    if not accepted(v, ctx.allow_bounded):
        detail = getattr(v, "sigma", None)
        extra = f" (counterexample {detail})" if detail else f" (only {type(v).__name__})"
        raise _Fail(OBLIGATION, f"{what}: {show_bool(b1)} does not entail {show_bool(b2)}{extra}")


def _separate(f, g, what):
    _need(formulas_separate(f, g), SEPARATION,
          f"{what}: {show_formula(f)} and {show_formula(g)} are not separate")


def _premises(node, n):
    _need(len(node.premises) == n, PREMISE_COUNT,
          f"expected {n} premise{'s' if n != 1 else ''}, got {len(node.premises)}")
    return [p.conclusion for p in node.premises]


def _single(seq, what):
    binders, leaves = parts(canon_sys(seq.sys))
    _need(not binders and len(leaves) == 1, STRUCTURE,
          f"{what} needs a single confined process, got {show_system(seq.sys)}")
    return leaves[0]


# -- axioms ------------------------------------------------------------------------------------

def r_nil(node, ctx):
    c = node.conclusion
    _premises(node, 0)
    binders, leaves = parts(canon_sys(c.sys))
    _need(not binders and len(leaves) <= 1 and all(isinstance(x.proc, Nil) for x in leaves),
          STRUCTURE, f"lNil needs an inert process, got {show_system(c.sys)}")
    _need(formula_equiv(c.pre, c.post), FORMULA, "lNil needs equal pre and postconditions")


def r_fls(node, ctx):
    _premises(node, 0)
    _entails(ctx, node.conclusion.cond, FALSE, "the condition must be unsatisfiable")


def r_blk(node, ctx):
    c = node.conclusion
    _premises(node, 0)
    leaf = _single(c, "lBlk")
    atom = leaf_atom(leaf)
    _need(isinstance(atom, In), STRUCTURE, "lBlk needs an input process")
    _need(formula_equiv(c.pre, EMP), FORMULA, "lBlk needs precondition emp")
    _need(formula_equiv(c.post, Blk(atom.chan)), FORMULA, f"lBlk needs postcondition blk {atom.chan}")
    _need(f"{atom.chan}?" in {str(q) for q in leaf.perms}, PERMISSION,
          f"the process does not own {atom.chan}?")


def _out_common(node):
    c = node.conclusion
    _premises(node, 0)
    leaf = _single(c, node.rule)
    atom = leaf_atom(leaf)
    _need(isinstance(atom, Out), STRUCTURE, f"{node.rule} needs an output process")
    _need(formula_equiv(c.pre, EMP), FORMULA, f"{node.rule} needs precondition emp")
    post = conjuncts(c.post)
    _need(len(post) == 1 and isinstance(post[0], State) and post[0].chan == atom.chan, FORMULA,
          f"{node.rule} needs postcondition {atom.chan} |-> ...")
    need = c.env.get(atom.chan)
    _need(need <= leaf.perms, PERMISSION,
          f"the output on {atom.chan} lacks {', '.join(sorted(map(str, need - leaf.perms)))}")
    _need(len(post[0].args) == len(atom.args), FORMULA, "arity of output and assertion differ")
    return atom, post[0]


def r_out(node, ctx):
    atom, st = _out_common(node)
    _need(all(fold_formula(State("_", [a])) == fold_formula(State("_", [b]))
              for a, b in zip(atom.args, st.args)), FORMULA,
          "output values differ from the asserted ones")


def r_outd(node, ctx):
    atom, st = _out_common(node)
    if atom.args:
        _entails(ctx, node.conclusion.cond,
                 conj(*[eq(a, b) for a, b in zip(atom.args, st.args)]),
                 "output values must equal the asserted ones")


# -- logical rules --------------------------------------------------------------------------------

def r_in(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_frame(c, p, pre=False)
    binders, leaves, free = _open_leaves(c.sys)
    want_chan = node.inst.get("chan")
    want_args = node.inst.get("args")
    target = canon_sys(p.sys)
    best = None
    for i in free:
        leaf = leaves[i]
        atom = leaf_atom(leaf)
        if not isinstance(atom, In) or (want_chan and atom.chan != want_chan):
            continue
        ch = atom.chan
        for st in _state_conjuncts(c.pre, ch, want_args):
            if len(st.args) != len(atom.params):
                best = best or (FORMULA, f"arity of {ch} differs from the assertion")
                continue
            rest = formula_minus(c.pre, st)
            if not formula_equiv(rest, p.pre):
                best = best or (FORMULA, f"premise precondition should be {show_formula(rest)}")
                continue
            gamma = c.env.get(ch)
            if f"{ch}?" not in {str(q) for q in leaf.perms}:
                best = (PERMISSION, f"the input on {ch} does not own {ch}?")
                continue
            if leaf.perms & gamma:
                best = (PERMISSION, f"the input on {ch} already owns permissions guarding {ch}")
                continue
            body = substitute(atom.body, dict(zip(atom.params, st.args)))
            others = leaves[:i] + leaves[i + 1:]
            for g in _subsets(sorted(gamma)):
                try:
                    cand = rebuild(binders, others + [Leaf(leaf.perms | frozenset(g), body)])
                except NotWellResourced:
                    continue
                if cand == target:
                    return
            best = (STRUCTURE, f"premise system does not continue the input on {ch} "
                    f"with {show_formula(st)}")
    raise _Fail(*(best or (STRUCTURE, "no input matches an assertion of the precondition")))


def _state_conjuncts(f, chan, args):
    seen = []
    for a in conjuncts(f):
        a = fold_formula(a)
        if isinstance(a, State) and a.chan == chan and a not in seen:
            if args is None or a == fold_formula(State(chan, args)):
                seen.append(a)
    return seen


def _subsets(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def r_if(node, ctx):
    c = node.conclusion
    p1, p2 = _premises(node, 2)
    for p in (p1, p2):
        _same_frame(c, p, cond=False)
    binders, leaves, free = _open_leaves(c.sys)
    t1, t2 = canon_sys(p1.sys), canon_sys(p2.sys)
    best = (STRUCTURE, "no conditional matches the premises")
    for i in free:
        atom = leaf_atom(leaves[i])
        if not isinstance(atom, If):
            continue
        b1, b2 = c.cond, atom.cond
        if not (_same_cond(p1.cond, And(b1, b2)) and _same_cond(p2.cond, And(b1, Not(b2)))):
            best = (CONDITION, "premise conditions must extend the condition with the "
                    "branch test and its negation")
            continue
        others = leaves[:i] + leaves[i + 1:]
        then = rebuild(binders, others + [Leaf(leaves[i].perms, atom.then)])
        else_ = rebuild(binders, others + [Leaf(leaves[i].perms, atom.else_)])
        if then == t1 and else_ == t2:
            return
        best = (STRUCTURE, "premise systems are not the two branches of the conditional")
    raise _Fail(*best)


def r_def(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_frame(c, p)
    binders, leaves, free = _open_leaves(c.sys)
    target = canon_sys(p.sys)
    for i in free:
        atom = leaf_atom(leaves[i])
        if not isinstance(atom, Call) or atom.name not in ctx.defs:
            continue
        body = ctx.defs[atom.name].instantiate(atom.args, atom.chans)
        others = leaves[:i] + leaves[i + 1:]
        if rebuild(binders, others + [Leaf(leaves[i].perms, body)]) == target:
            return
    raise _Fail(STRUCTURE, "premise system is not an unfolding of a call in the conclusion")


def r_par(node, ctx):
    c = node.conclusion
    p1, p2 = _premises(node, 2)
    for p in (p1, p2):
        _same_frame(c, p, pre=False, post=False)
    cut = node.inst.get("cut", EMP)
    psi1 = formula_minus(p1.post, cut)
    _need(psi1 is not None, CUT_SHAPE,
          f"left postcondition {show_formula(p1.post)} does not contain {show_formula(cut)}")
    phi2 = formula_minus(p2.pre, cut)
    _need(phi2 is not None, CUT_SHAPE,
          f"right precondition {show_formula(p2.pre)} does not contain {show_formula(cut)}")
    _need(formula_equiv(c.pre, sep(p1.pre, phi2)), FORMULA,
          f"precondition should be {show_formula(sep(p1.pre, phi2))}")
    _need(formula_equiv(c.post, sep(psi1, p2.post)), FORMULA,
          f"postcondition should be {show_formula(sep(psi1, p2.post))}")
    _separate(phi2, cut, "residual precondition and cut")
    _separate(psi1, p2.post, "postconditions")
    _compose(c, p1, p2)


def _compose(c, p1, p2):
    try:
        both = SPar(p1.sys, p2.sys)
    except NotWellResourced as exc:
        raise _Fail(STRUCTURE, str(exc))
    _sys_eq(both, c.sys, "conclusion system")


def r_spl(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_frame(c, p)
    target = canon_sys(c.sys)
    if canon_sys(p.sys) == target:
        return  # splitting off an inert process
    binders, leaves, free = _open_leaves(p.sys)
    for i, j in itertools.combinations(free, 2):
        a, b = leaves[i], leaves[j]
        merged = Leaf(a.perms | b.perms, _par(a.proc, b.proc))
        others = [x for k, x in enumerate(leaves) if k not in (i, j)]
        if rebuild(binders, others + [merged]) == target:
            return
    raise _Fail(STRUCTURE, "premise system is not a split of the conclusion")


def _par(a, b):
    return Par(a, b)


def r_res(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    chans = node.inst.get("chans")
    _need(bool(chans), MALFORMED, "lRes needs :chans")
    _need(c.env == env_restrict(p.env, chans), ENVIRONMENT,
          f"environment should be {show_env(env_restrict(p.env, chans))}")
    _need(_same_cond(c.cond, p.cond), CONDITION, "condition differs from the premise")
    _need(formula_equiv(c.pre, p.pre), FORMULA, "precondition differs from the premise")
    _need(not (fn_formula(c.pre) & set(chans)), FRESHNESS,
          "the precondition mentions a restricted channel")
    want = formula_restrict(p.post, chans)
    _need(formula_equiv(c.post, want), FORMULA, f"postcondition should be {show_formula(want)}")
    _sys_eq(snews(chans, p.sys), c.sys, "conclusion system")


def r_lcl(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_frame(c, p)
    binders, leaves, free = _open_leaves(c.sys)
    target = canon_sys(p.sys)
    for i in free:
        bs, _ = split_canon(leaves[i].proc)
        others = leaves[:i] + leaves[i + 1:]
        for b in bs:
            if rebuild(binders, others + [_lift_binder(leaves[i], b)]) == target:
                return
    raise _Fail(STRUCTURE, "premise system does not lift a local channel of the conclusion")


def r_inst(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    x, e = _subst_inst(node)
    sigma = {x: e}
    _same_env(c, p)
    _need(_same_cond(c.cond, subst_bool(p.cond, sigma)), CONDITION,
          f"condition should be {show_bool(subst_bool(p.cond, sigma))}")
    _need(formula_equiv(c.pre, subst_formula(p.pre, sigma)), FORMULA,
          "precondition is not the instantiated premise precondition")
    _need(formula_equiv(c.post, subst_formula(p.post, sigma)), FORMULA,
          "postcondition is not the instantiated premise postcondition")
    _sys_eq(subst_sys(p.sys, sigma), c.sys, "conclusion system")


def r_sub(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    x, e = _subst_inst(node)
    sigma = {x: e}
    _same_env(c, p)
    _need(_same_cond(c.cond, p.cond), CONDITION, "condition differs from the premise")
    _need(formula_equiv(p.pre, subst_formula(c.pre, sigma)), FORMULA,
          "premise precondition is not the substituted precondition")
    _need(formula_equiv(p.post, subst_formula(c.post, sigma)), FORMULA,
          "premise postcondition is not the substituted postcondition")
    _sys_eq(subst_sys(c.sys, sigma), p.sys)
    _entails(ctx, c.cond, eq(Var(x), e), f"the condition must fix {x}")


def _subst_inst(node):
    x, e = node.inst.get("var"), node.inst.get("expr")
    _need(x is not None and e is not None, MALFORMED, f"{node.rule} needs :var and :expr")
    return x, e


def r_imp(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_env(c, p)
    _entails(ctx, c.cond, p.cond, "the condition must entail the premise condition")
    _need(formula_implies(c.pre, p.pre), FORMULA,
          f"{show_formula(c.pre)} does not imply {show_formula(p.pre)}")
    _need(formula_implies(p.post, c.post), FORMULA,
          f"{show_formula(p.post)} does not imply {show_formula(c.post)}")
    _sys_eq(p.sys, c.sys, "conclusion system")


def r_ren(node, ctx):
    c = node.conclusion
    (p,) = _premises(node, 1)
    new, old = node.inst.get("new"), node.inst.get("old")
    _need(new is not None and old is not None, MALFORMED, "lRen needs :new and :old")
    used = p.env.names() | fn_formula(p.pre) | fn_formula(p.post) | sfn(p.sys)
    _need(new == old or new not in used, FRESHNESS, f"{new} is not fresh in the premise")
    _need(c.env == env_rename(p.env, new, old), ENVIRONMENT, "environment is not renamed")
    _need(_same_cond(c.cond, p.cond), CONDITION, "condition differs from the premise")
    _need(formula_equiv(c.pre, rename_formula(p.pre, new, old)), FORMULA,
          "precondition is not renamed")
    _need(formula_equiv(c.post, rename_formula(p.post, new, old)), FORMULA,
          "postcondition is not renamed")
    _sys_eq(rename_sys(p.sys, [(new, old)]), c.sys, "conclusion system")


# -- derived rules ----------------------------------------------------------------------------------

def r_cut(node, ctx):
    c = node.conclusion
    p1, p2 = _premises(node, 2)
    for p in (p1, p2):
        _same_frame(c, p, pre=False, post=False)
    _need(formula_equiv(p1.post, p2.pre), CUT_SHAPE,
          f"left postcondition {show_formula(p1.post)} is not the right precondition "
          f"{show_formula(p2.pre)}")
    _need(formula_equiv(c.pre, p1.pre), FORMULA, "precondition differs from the left premise")
    _need(formula_equiv(c.post, p2.post), FORMULA, "postcondition differs from the right premise")
    _compose(c, p1, p2)


def _sep_common(node, state):
    c = node.conclusion
    p1, p2 = _premises(node, 2)
    for p in (p1, p2):
        _same_frame(c, p, pre=False, post=False)
    _need(formula_equiv(c.pre, sep(p1.pre, p2.pre)), FORMULA, "precondition is not the combination")
    _need(formula_equiv(c.post, sep(p1.post, p2.post)), FORMULA,
          "postcondition is not the combination")
    if state:
        _need(all(is_state_formula(f) for f in (p1.pre, p1.post, p2.pre, p2.post)), SEPARATION,
              "lSepSt needs state formulas")
    else:
        _separate(p1.post, p2.post, "postconditions")
    _compose(c, p1, p2)


def r_sep(node, ctx):
    _sep_common(node, False)


def r_sepst(node, ctx):
    _sep_common(node, True)


def _frame_of(node, p):
    c = node.conclusion
    psi = node.inst.get("frame")
    if psi is None:
        psi = formula_minus(c.pre, p.pre)
        _need(psi is not None, FORMULA, "precondition does not extend the premise precondition")
    return psi


def _frm_common(node, state):
    c = node.conclusion
    (p,) = _premises(node, 1)
    _same_frame(c, p, pre=False, post=False)
    psi = _frame_of(node, p)
    _need(formula_equiv(c.pre, sep(p.pre, psi)), FORMULA, "precondition is not framed")
    _need(formula_equiv(c.post, sep(p.post, psi)), FORMULA, "postcondition is not framed")
    if state:
        _need(all(is_state_formula(f) for f in (p.pre, p.post, psi)), SEPARATION,
              "lFrmSt needs state formulas")
    else:
        _separate(p.post, psi, "postcondition and frame")
    _sys_eq(p.sys, c.sys, "conclusion system")


def r_frm(node, ctx):
    _frm_common(node, False)


def r_frmst(node, ctx):
    _frm_common(node, True)


BASE_RULES = {
    "lNil": r_nil, "lFls": r_fls, "lBlk": r_blk, "lOut": r_out, "lIn": r_in, "lIf": r_if,
    "lDef": r_def, "lPar": r_par, "lSpl": r_spl, "lRes": r_res, "lLcl": r_lcl,
    "lInst": r_inst, "lSub": r_sub, "lImp": r_imp, "lRen": r_ren,
}
DERIVED_RULES = {
    "lCut": r_cut, "lSep": r_sep, "lSepSt": r_sepst, "lOutD": r_outd, "lInD": r_in,
    "lFrm": r_frm, "lFrmSt": r_frmst,
}
RULES = {**BASE_RULES, **DERIVED_RULES}


@dataclass
class _Ctx:
    defs: DefTable
    allow_bounded: bool = False
    bound: int = DEFAULT_BOUND
    max_vars: int = DEFAULT_MAX_VARS


def check_step(node, defs, allow_bounded=False, bound=DEFAULT_BOUND, max_vars=DEFAULT_MAX_VARS):
    """Check one rule application against its premises' conclusions.

    Returns None if it is valid, else (kind, reason).
    """
    ctx = _Ctx(defs or DefTable(), allow_bounded, bound, max_vars)
    rule = RULES.get(node.rule)
    if rule is None:
        return UNKNOWN_RULE, f"no rule named {node.rule}"
    if not well_resourced(node.conclusion.sys):
        return MALFORMED, "the system is not well resourced"
    try:
        rule(node, ctx)
    except _Fail as f:
        return f.kind, f.reason
    except PermCCSError as exc:
        return MALFORMED, str(exc)
    return None


def check_proof(tree, defs=None, allow_bounded=False, bound=DEFAULT_BOUND,
                max_vars=DEFAULT_MAX_VARS, base_only=False):
    """Check every node.  The result holds the root sequent and any RuleErrors."""
    errors = []

    def walk(node, path):
        for k, child in enumerate(node.premises):
            walk(child, f"{path}.{k}")
        if base_only and node.rule in DERIVED_RULES:
            errors.append(RuleError(path, node.rule, UNKNOWN_RULE, "derived rule not allowed"))
            return
        res = check_step(node, defs, allow_bounded, bound, max_vars)
        if res is not None:
            errors.append(RuleError(path, node.rule, *res))

    walk(tree, "root")
    return CheckResult(tree.conclusion, errors)


def node_at(tree, path):
    node = tree
    for k in path.split(".")[1:]:
        node = node.premises[int(k)]
    return node


def iter_nodes(tree, path="root"):
    yield path, tree
    for k, child in enumerate(tree.premises):
        yield from iter_nodes(child, f"{path}.{k}")


# -- expansion of derived rules -------------------------------------------------------------------

def _seq(c, **kw):
    d = dict(env=c.env, cond=c.cond, pre=c.pre, sys=c.sys, post=c.post)
    d.update(kw)
    return Sequent(**d)


def _imp(conclusion, child):
    return ProofTree("lImp", conclusion, {}, [child], child.line)


def expand_derived(tree):
    """Replace every derived rule by a derivation using base rules only."""
    prem = [expand_derived(p) for p in tree.premises]
    c, r, line = tree.conclusion, tree.rule, tree.line
    if r == "lCut":
        p1, p2 = prem
        cut = p1.conclusion.post
        left = _imp(_seq(p1.conclusion, post=sep(EMP, cut)), p1)
        right = _imp(_seq(p2.conclusion, pre=sep(EMP, cut)), p2)
        par = ProofTree("lPar", _seq(c, pre=sep(c.pre, EMP), post=sep(EMP, c.post)),
                        {"cut": cut}, [left, right], line)
        return _imp(c, par)
    if r in ("lSep", "lSepSt"):
        p1, p2 = prem
        left = _imp(_seq(p1.conclusion, post=sep(p1.conclusion.post, EMP)), p1)
        right = _imp(_seq(p2.conclusion, pre=sep(p2.conclusion.pre, EMP)), p2)
        return ProofTree("lPar", c, {"cut": EMP}, [left, right], line)
    if r in ("lFrm", "lFrmSt"):
        (p,) = prem
        psi = tree.inst.get("frame")
        if psi is None:
            psi = formula_minus(c.pre, p.conclusion.pre)
        unit = Leaf(frozenset(), NIL)
        nil = ProofTree("lNil", _seq(c, pre=psi, sys=unit, post=psi), {}, [], line)
        both = _seq(c, sys=SPar(p.conclusion.sys, unit))
        sep_node = ProofTree("lSep", both, {}, [p, nil], line)
        return _imp(c, expand_derived(sep_node))
    if r == "lOutD":
        return _expand_outd(tree)
    if r == "lInD":
        lin = ProofTree("lIn", c, dict(tree.inst), prem, line)
        return _imp(c, lin)
    return ProofTree(r, c, dict(tree.inst), prem, line)


def _expand_outd(tree):
    c = tree.conclusion
    leaf = parts(canon_sys(c.sys))[1][0]
    atom = leaf_atom(leaf)
    e1 = list(atom.args)
    e2 = list(conjuncts(c.post)[0].args)
    if not e1:
        return ProofTree("lOut", c, {}, [], tree.line)
    avoid = fv_bool(c.cond) | fn_formula(c.post)
    xs = []
    while len(xs) < len(e1):
        x = fresh_var()
        if x not in avoid:
            xs.append(x)
    b_x = conj(c.cond, *[eq(Var(x), a) for x, a in zip(xs, e1)],
               *[eq(Var(x), b) for x, b in zip(xs, e2)])
    # lOut on the asserted values
    node = ProofTree("lOut", _seq(c, cond=b_x, sys=Leaf(leaf.perms, Out(atom.chan, e2))),
                     {}, [], tree.line)
    # lSub replaces the asserted values by the variables one at a time
    args = list(e2)
    for k in reversed(range(len(xs))):
        args[k] = Var(xs[k])
        sys_k = Leaf(leaf.perms, Out(atom.chan, list(args)))
        node = ProofTree("lSub", _seq(c, cond=b_x, sys=sys_k), {"var": xs[k], "expr": e2[k]},
                         [node], tree.line)
    # lInst instantiates the variables with the output values
    cond = b_x
    for k in range(len(xs)):
        sigma = {xs[k]: e1[k]}
        cond = subst_bool(cond, sigma)
        args[k] = e1[k]
        node = ProofTree("lInst", _seq(c, cond=cond, sys=Leaf(leaf.perms, Out(atom.chan, list(args)))),
                         {"var": xs[k], "expr": e1[k]}, [node], tree.line)
    return _imp(c, node)


# -- proof scripts ----------------------------------------------------------------------------------

_SX = re.compile(r'''\s+|[;#][^\n]*|(?P<open>\()|(?P<close>\))|"(?P<str>(?:[^"\\]|\\.)*)"|(?P<atom>[^\s()";#]+)''')


@dataclass
class _Atom:
    text: str
    line: int


@dataclass
class _Str:
    text: str
    line: int


def read_sexprs(text):
    """Parse S-expressions into nested lists of _Atom and _Str."""
    stack = [[]]
    pos, line = 0, 1
    while pos < len(text):
        m = _SX.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, 0)
        if m.group("open"):
            stack.append([])
            stack[-1].append(line)
        elif m.group("close"):
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", line, 0)
            done = stack.pop()
            stack[-1].append(done)
        elif m.group("str") is not None:
            stack[-1].append(_Str(re.sub(r"\\(.)", r"\1", m.group("str")), line))
        elif m.group("atom"):
            stack[-1].append(_Atom(m.group("atom"), line))
        line += m.group(0).count("\n")
        pos = m.end()
    if len(stack) != 1:
        raise ParseError("unbalanced '('", line, 0)
    return stack[0]


_FIELDS = ("env", "cond", "pre", "sys", "post")
_MACRO = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")


class _ScriptLoader:
    def __init__(self, defs, base_dir):
        self.defs = DefTable(defs or {})
        self.base_dir = base_dir
        self.macros = {}

    def expand(self, s):
        def sub(m):
            if m.group(1) not in self.macros:
                raise ParseError(f"undefined macro ${m.group(1)}", s.line, 0)
            return self.macros[m.group(1)]
        out = s.text
        for _ in range(10):
            new = _MACRO.sub(sub, out)
            if new == out:
                break
            out = new
        return out

    def load(self, text):
        roots = []
        for form in read_sexprs(text):
            if not isinstance(form, list) or len(form) < 2 or not isinstance(form[1], _Atom):
                raise ParseError("expected a parenthesised form", getattr(form, "line", 0), 0)
            line, head, args = form[0], form[1].text, form[2:]
            if head == "include":
                self._include(self._string(args, 0, line))
            elif head == "defs":
                from .parser import parse_process
                self.defs, _ = parse_process(self.expand(args[0]), self.defs)
            elif head == "define":
                name = args[0].text
                self.macros[name] = self.expand(args[1])
            elif head == "proof":
                roots.append(self.node(args[0], None))
            elif head in RULES or head[:1] == "l":
                roots.append(self.node(form, None))
            else:
                raise ParseError(f"unknown form {head}", line, 0)
        if len(roots) != 1:
            raise ParseError(f"expected exactly one proof, found {len(roots)}", 0, 0)
        return self.defs, roots[0]

    def _string(self, args, i, line):
        if len(args) <= i or not isinstance(args[i], _Str):
            raise ParseError("expected a string", line, 0)
        return self.expand(args[i])

    def _include(self, name):
        from .parser import parse_process
        path = os.path.join(self.base_dir or ".", name)
        if not os.path.exists(path):
            from .corpus import data_path
            path = data_path(name)
        with open(path) as fh:
            self.defs, _ = parse_process(fh.read(), self.defs)

    def node(self, form, parent):
        from .parser import (parse_bool, parse_env, parse_expr, parse_formula,
                             parse_sequent, parse_system)
        if not isinstance(form, list) or len(form) < 2:
            raise ParseError("expected a rule application", getattr(form, "line", 0), 0)
        line, rule = form[0], form[1].text
        vals, kids = {}, []
        items = form[2:]
        k = 0
        while k < len(items):
            it = items[k]
            if isinstance(it, _Atom) and it.text.startswith(":"):
                if k + 1 >= len(items):
                    raise ParseError(f"missing value for {it.text}", it.line, 0)
                vals[it.text[1:]] = items[k + 1]
                k += 2
            else:
                kids.append(it)
                k += 1

        def text(key):
            v = vals[key]
            return self.expand(v) if isinstance(v, _Str) else v.text

        try:
            if "seq" in vals:
                seq = parse_sequent(text("seq"), self.defs)
                fields = dict(env=seq.env, cond=seq.cond, pre=seq.pre, sys=seq.sys, post=seq.post)
            else:
                if parent is None and not all(f in vals for f in _FIELDS):
                    missing = [f for f in _FIELDS if f not in vals]
                    raise ParseError(f"the root must give {', '.join(missing)}", line, 0)
                base = parent or Sequent(None, None, None, None, None)
                fields = {f: getattr(base, f) for f in _FIELDS}
                parsers = {"env": parse_env, "cond": parse_bool, "pre": parse_formula,
                           "post": parse_formula,
                           "sys": lambda t: parse_system(t, self.defs)}
                for f in _FIELDS:
                    if f in vals:
                        fields[f] = parsers[f](text(f))
            conclusion = Sequent(**fields)
            inst = {}
            for key in vals:
                if key in _FIELDS or key == "seq" or key == "label":
                    continue
                t = text(key)
                if key in ("cut", "frame"):
                    inst[key] = parse_formula(t)
                elif key == "args":
                    inst[key] = tuple(parse_expr(a) for a in _split_top(t))
                elif key == "chans":
                    inst[key] = tuple(a.strip() for a in t.split(",") if a.strip())
                elif key == "expr":
                    inst[key] = parse_expr(t)
                elif key in ("var", "new", "old", "chan"):
                    inst[key] = t
                else:
                    raise ParseError(f"unknown field :{key}", line, 0)
        except ParseError as exc:
            if not exc.line:
                exc.line = line
            raise
        except PermCCSError as exc:
            raise ParseError(f"line {line}: {exc}", line, 0)
        tree = ProofTree(rule, conclusion, inst, [], line)
        tree.premises = [self.node(kid, conclusion) for kid in kids]
        return tree


def _split_top(t):
    out, depth, cur = [], 0, ""
    for ch in t:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur)
    return out


def load_script(text, defs=None, base_dir=None):
    """Parse a proof script; returns (DefTable, ProofTree)."""
    return _ScriptLoader(defs, base_dir).load(text)


def load_script_file(path, defs=None):
    with open(path) as fh:
        return load_script(fh.read(), defs, os.path.dirname(os.path.abspath(path)))


def dump_script(tree, defs=None, indent=0):
    """A script for the tree with every sequent spelled out."""
    from .printer import show_expr
    pad = "  " * indent
    c = tree.conclusion
    q = _quote
    lines = [f"{pad}({tree.rule}"]
    lines.append(f"{pad}  :env {q(show_env(c.env))} :cond {q(show_bool(c.cond))}")
    lines.append(f"{pad}  :pre {q(show_formula(c.pre))} :post {q(show_formula(c.post))}")
    lines.append(f"{pad}  :sys {q(show_system(c.sys, defs))}")
    for k, v in tree.inst.items():
        if k in ("cut", "frame"):
            lines.append(f"{pad}  :{k} {q(show_formula(v))}")
        elif k == "args":
            lines.append(f"{pad}  :args {q(', '.join(show_expr(a) for a in v))}")
        elif k == "chans":
            lines.append(f"{pad}  :chans {q(', '.join(v))}")
        elif k == "expr":
            lines.append(f"{pad}  :expr {q(show_expr(v))}")
        else:
            lines.append(f"{pad}  :{k} {v}")
    for p in tree.premises:
        lines.append(dump_script(p, defs, indent + 1))
    lines[-1] += ")"
    return "\n".join(lines)


def _quote(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# -- semantic validity on samples -------------------------------------------------------------------

@dataclass
class SemanticResult:
    status: str            # "valid", "counterexample" or "unknown"
    points: int = 0
    contexts: int = 0
    counterexample: object = None
    reason: str = ""

    def __bool__(self):
        return self.status == "valid"


DEFAULT_GRID = (0, 1, 2, 5, 9, 10, 11)


def _literals(b):
    from .syntax import Lit, Node
    if isinstance(b, Lit):
        return {b.n}
    out = set()
    for f in getattr(b, "_fields", ()):
        v = getattr(b, f)
        for x in (v if isinstance(v, tuple) else (v,)):
            if isinstance(x, Node):
                out |= _literals(x)
    return out


def sample_points(vars_, cond, grid=DEFAULT_GRID, limit=64, extra=4):
    """Substitutions over the grid satisfying cond, evenly thinned to `limit`.

    Up to `extra` constants of the condition, and their neighbours, join the
    grid so that conditions such as x = 3 or x <= -7 still get samples.
    """
    from .syntax import eval_bool
    consts = sorted(_literals(cond) - set(grid), key=lambda v: (abs(v), v))[:extra]
    grid = tuple(sorted(set(grid) | {v + d for v in consts for d in (-1, 0, 1)}))
    pts = []
    for vals in itertools.product(grid, repeat=len(vars_)):
        sigma = dict(zip(vars_, vals))
        if eval_bool(cond, sigma):
            pts.append(sigma)
    if len(pts) > limit:
        step = len(pts) / limit
        pts = [pts[int(k * step)] for k in range(limit)]
    return pts


def _contexts(env, pre, sys, max_contexts):
    """Candidate environments T for the precondition, separate from sys."""
    from .systems import UNIT, Perm, owned_perms, separate, spar
    leaves = []
    for a in conjuncts(pre):
        if isinstance(a, State):
            need = env.get(a.chan) or frozenset({Perm(a.chan, "!")})
            leaves.append(Leaf(need, Out(a.chan, a.args)))
        elif isinstance(a, Blk):
            arity = _arity_on(sys, a.chan)
            params = [f"z{k}" for k in range(arity)]
            leaves.append(Leaf({Perm(a.chan, "?")}, In(a.chan, params, NIL)))
    owned = owned_perms(sys)
    pool = set()
    for c in sorted(env.names() | fn_formula(pre) | sfn(sys)):
        pool |= {Perm(c, "!"), Perm(c, "?")}
    for leaf in leaves:
        pool -= leaf.perms
    pool = sorted(pool - owned, key=str)
    if not leaves:
        return [UNIT]
    out = []
    # fewest extra permissions first
    for extra in range(len(pool) + 1):
        for chosen in itertools.combinations(pool, extra):
            for placement in itertools.product(range(len(leaves)), repeat=len(chosen)):
                ls = list(leaves)
                for q, k in zip(chosen, placement):
                    ls[k] = Leaf(ls[k].perms | {q}, ls[k].proc)
                t = spar(*ls)
                if separate(t, sys):
                    out.append(t)
                if len(out) >= max_contexts:
                    return out
    return out


def _arity_on(sys, chan):
    stack = [sys]
    while stack:
        s = stack.pop()
        if isinstance(s, Leaf):
            for a in _atoms(s.proc):
                if isinstance(a, Out) and a.chan == chan:
                    return len(a.args)
        elif isinstance(s, SPar):
            stack += [s.left, s.right]
        else:
            stack.append(s.body)
    return 0


def _atoms(p):
    if isinstance(p, Par):
        return _atoms(p.left) + _atoms(p.right)
    if isinstance(p, New):
        return _atoms(p.body)
    if isinstance(p, In):
        return [p] + _atoms(p.body)
    if isinstance(p, If):
        return _atoms(p.then) + _atoms(p.else_)
    return [p]


def sequent_holds_semantically(seq, defs=None, grid=DEFAULT_GRID, limit=32, max_contexts=16,
                               budget=None):
    """Test the sequent on sample substitutions and sample environments.

    Reports the first counterexample found, `valid` when every sample passes,
    and `unknown` when some satisfaction check ran out of budget.
    """
    from .logic import Unsat, Unknown as LUnknown, fv_formula, satisfies
    from .process import DEFAULT_BUDGET
    from .systems import sfv
    budget = budget or DEFAULT_BUDGET
    defs = defs or DefTable()
    vars_ = sorted(fv_bool(seq.cond) | fv_formula(seq.pre) | fv_formula(seq.post) | sfv(seq.sys))
    res = SemanticResult("valid")
    unknown = None
    for sigma in sample_points(vars_, seq.cond, grid, limit):
        res.points += 1
        pre = fold_formula(subst_formula(seq.pre, sigma))
        post = fold_formula(subst_formula(seq.post, sigma))
        s = subst_sys(seq.sys, sigma)
        for t in _contexts(seq.env, pre, s, max_contexts):
            if not satisfies(seq.env, t, pre, defs, budget):
                continue
            res.contexts += 1
            v = satisfies(seq.env, SPar(t, s), post, defs, budget)
            if isinstance(v, Unsat):
                return SemanticResult("counterexample", res.points, res.contexts,
                                      (sigma, t), v.reason)
            if isinstance(v, LUnknown):
                unknown = v.reason
    if unknown is not None:
        return SemanticResult("unknown", res.points, res.contexts, None, unknown)
    if not res.points:
        return SemanticResult("unknown", 0, 0, None, "no sample point satisfies the condition")
    return res


def process_sequent_holds(cond, pre, proc, post, narratives, defs=None, **kw):
    """A process sequent holds if some narrative (env, perms) makes the confined
    sequent hold.  Returns (narrative, SemanticResult) for the first that does,
    or (None, last result)."""
    last = SemanticResult("counterexample", reason="no narrative given")
    for env, perms in narratives:
        r = sequent_holds_semantically(Sequent(env, cond, pre, Leaf(perms, proc), post), defs, **kw)
        if r:
            return (env, perms), r
        last = r
    return None, last
