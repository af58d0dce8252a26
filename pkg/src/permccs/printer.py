"""Pretty printer for every object kind; output re-parses to an alpha-equal object."""
import itertools
import re

from .syntax import (Add, And, Call, Expr, If, In, Leq, Lit, New, Nil, Not, Out, Par,
                     Process, Var, BoolExpr, bound_names, fn, fv,
                     rename_channels, substitute)

_RESERVED = re.compile(r"_|.*[~%]")


# -- expressions and conditions ------------------------------------------------------

def show_expr(e, prec=0):
    if isinstance(e, Lit):
        return str(e.n) if e.n >= 0 else f"({e.n})"
    if isinstance(e, Var):
        return e.name
    op = "+" if isinstance(e, Add) else "-"
    s = f"{show_expr(e.left, 1)} {op} {show_expr(e.right, 2)}"
    return f"({s})" if prec >= 2 else s


def show_args(args):
    return "(" + ", ".join(show_expr(e) for e in args) + ")"


def _is_eq(b):
    return (isinstance(b, And) and isinstance(b.left, Leq) and isinstance(b.right, Leq)
            and b.left.left == b.right.right and b.left.right == b.right.left)


def show_bool(b, prec=0):
    # prec: 0 implication, 1 disjunction, 2 conjunction, 3 negation operand
    if isinstance(b, Leq):
        if b == Leq(Lit(0), Lit(1)):
            return "true"
        if b == Leq(Lit(1), Lit(0)):
            return "false"
        return f"{show_expr(b.left)} <= {show_expr(b.right)}"
    if _is_eq(b):
        return f"{show_expr(b.left.left)} = {show_expr(b.left.right)}"
    if isinstance(b, Not):
        a = b.arg
        if isinstance(a, Leq) and a not in (Leq(Lit(0), Lit(1)), Leq(Lit(1), Lit(0))):
            return f"{show_expr(a.right)} < {show_expr(a.left)}"
        if isinstance(a, And) and isinstance(a.left, Not) and isinstance(a.right, Not):
            s = f"{show_bool(a.left.arg, 1)} or {show_bool(a.right.arg, 2)}"
            return f"({s})" if prec > 1 else s
        if isinstance(a, And) and isinstance(a.right, Not):
            s = f"{show_bool(a.left, 1)} => {show_bool(a.right.arg, 0)}"
            return f"({s})" if prec > 0 else s
        return f"not {show_bool(a, 3)}"
    s = f"{show_bool(b.left, 2)} and {show_bool(b.right, 3)}"
    return f"({s})" if prec > 2 else s


# -- processes ------------------------------------------------------------------------

def readable(p):
    """Alpha-rename reserved (machine-generated) bound names to plain identifiers."""
    chans, vars_ = bound_names(p)
    if not any(_RESERVED.match(n) for n in chans | vars_):
        return p
    taken = set(chans) | set(vars_) | set(fn(p)) | set(fv(p))
    return _readable(p, taken, itertools.count(1), itertools.count(1))


def _pick(prefix, counter, taken):
    while True:
        name = f"{prefix}{next(counter)}"
        if name not in taken:
            taken.add(name)
            return name


def _readable(p, taken, ccount, vcount):
    if isinstance(p, New):
        c, body = p.chan, p.body
        if _RESERVED.match(c):
            d = _pick("n", ccount, taken)
            body = rename_channels(body, [(d, c)])
            c = d
        return New(c, _readable(body, taken, ccount, vcount))
    if isinstance(p, In):
        params, body = list(p.params), p.body
        sub = {}
        for i, x in enumerate(params):
            if _RESERVED.match(x):
                y = _pick("y", vcount, taken)
                sub[x] = Var(y)
                params[i] = y
        if sub:
            body = substitute(body, sub)
        return In(p.chan, params, _readable(body, taken, ccount, vcount))
    if isinstance(p, If):
        return If(p.cond, _readable(p.then, taken, ccount, vcount),
                  _readable(p.else_, taken, ccount, vcount))
    if isinstance(p, Par):
        return Par(_readable(p.left, taken, ccount, vcount),
                   _readable(p.right, taken, ccount, vcount))
    return p


def show_call(p, defs=None):
    s = p.name + show_args(p.args)
    d = defs.get(p.name) if defs else None
    if d is not None and len(d.formals) == len(p.chans):
        pairs = [f"{a}/{f}" for a, f in zip(p.chans, d.formals) if a != f]
        return s + (f"[{', '.join(pairs)}]" if pairs else "")
    if p.chans:
        return s + "[" + ", ".join(p.chans) + "]"
    return s


def show_process(p, defs=None, prec=0):
    # prec 0: anything; 1: no bare parallel composition
    if isinstance(p, Out):
        return f"{p.chan}!{show_args(p.args)}"
    if isinstance(p, In):
        return f"{p.chan}?({', '.join(p.params)}).{show_process(p.body, defs, 1)}"
    if isinstance(p, If):
        return (f"if {show_bool(p.cond)} then {show_process(p.then, defs, 1)}"
                f" else {show_process(p.else_, defs, 1)}")
    if isinstance(p, Call):
        return show_call(p, defs)
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, New):
        names = []
        while isinstance(p, New):
            names.append(p.chan)
            p = p.body
        return f"new {', '.join(names)}.{show_process(p, defs, 1)}"
    s = f"{show_process(p.left, defs, 1)} | {show_process(p.right, defs, 0)}"
    return f"({s})" if prec >= 1 else s


def show_definition(name, d, defs=None):
    head = f"def {name}({', '.join(d.params)})"
    if d.formals:
        head += "[" + ", ".join(d.formals) + "]"
    return f"{head} = {show_process(readable(d.body), defs)}"


def show_defs(defs):
    return "\n".join(show_definition(n, defs[n], defs) for n in sorted(defs))


# -- everything else -----------------------------------------------------------------------

def show_perms(perms):
    return ", ".join(str(x) for x in sorted(perms, key=lambda q: (q.chan, q.pol)))


def show(obj, defs=None):
    from . import logic, systems
    if isinstance(obj, Expr):
        return show_expr(obj)
    if isinstance(obj, BoolExpr):
        return show_bool(obj)
    if isinstance(obj, Process):
        return show_process(readable(obj), defs)
    if isinstance(obj, systems.System):
        return systems.show_system(obj, defs)
    if isinstance(obj, logic.Formula):
        return logic.show_formula(obj)
    if isinstance(obj, logic.PermEnv):
        return logic.show_env(obj)
    return str(obj)
