"""Abstract syntax of the value-passing calculus: expressions, conditions, processes.

All nodes are immutable and hash-consed: the hash is computed once, and equal
terms built while the first is alive are the same object.  Large terms can
therefore be used as dictionary keys cheaply.
"""
import itertools
import weakref

from .errors import ArityMismatch, Overflow, UnboundVariable

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1


def check_int(n):
    if not (INT_MIN <= n <= INT_MAX):
        raise Overflow(f"integer {n} outside the 64-bit range")
    return n


class _Interned(type):
    """Hash-consing: structurally equal nodes are built as one object, so that
    equality on subterms is mostly an identity check."""

    def __call__(cls, *args):
        obj = super().__call__(*args)
        k = (cls,) + tuple(getattr(obj, f) for f in cls._fields)
        old = _TABLE.get(k)
        if old is not None:
            return old
        _TABLE[k] = obj
        return obj


_TABLE = weakref.WeakValueDictionary()


class Node(metaclass=_Interned):
    __slots__ = ("_h", "__weakref__")
    _fields = ()

    def __init__(self, *args):
        if len(args) != len(self._fields):
            raise TypeError(f"{type(self).__name__} takes {len(self._fields)} arguments")
        for f, a in zip(self._fields, args):
            object.__setattr__(self, f, a)
        object.__setattr__(self, "_h", hash((type(self).__name__,) + args))

    def __setattr__(self, name, value):
        raise AttributeError("syntax nodes are immutable")

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._h != other._h:
            return False
        return all(getattr(self, f) == getattr(other, f) for f in self._fields)

    def __ne__(self, other):
        return not self == other

    def __reduce__(self):
        return (type(self), tuple(getattr(self, f) for f in self._fields))

    def __repr__(self):
        inner = ", ".join(repr(getattr(self, f)) for f in self._fields)
        return f"{type(self).__name__}({inner})"

    def __str__(self):
        from .printer import show
        return show(self)


# -- expressions ------------------------------------------------------------

class Expr(Node):
    __slots__ = ()


class Lit(Expr):
    __slots__ = ("n",)
    _fields = ("n",)

    def __init__(self, n):
        super().__init__(check_int(int(n)))


class Var(Expr):
    __slots__ = ("name",)
    _fields = ("name",)


class Add(Expr):
    __slots__ = ("left", "right")
    _fields = ("left", "right")


class Sub(Expr):
    __slots__ = ("left", "right")
    _fields = ("left", "right")


def lit(e):
    """Coerce ints and variable names to expressions."""
    if isinstance(e, Expr):
        return e
    if isinstance(e, bool):
        raise TypeError("booleans are not values")
    if isinstance(e, int):
        return Lit(e)
    if isinstance(e, str):
        return Var(e)
    raise TypeError(f"cannot make an expression from {e!r}")


def fv_expr(e):
    if isinstance(e, Lit):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    return fv_expr(e.left) | fv_expr(e.right)


def _lookup(name, sigma):
    if name not in sigma:
        raise UnboundVariable(name)
    v = sigma[name]
    if isinstance(v, Lit):
        return v.n
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    raise UnboundVariable(name)


def eval_expr(e, sigma=None):
    """Evaluate e to an integer; every free variable must map to a value."""
    sigma = sigma or {}
    if isinstance(e, Lit):
        return e.n
    if isinstance(e, Var):
        return _lookup(e.name, sigma)
    a = eval_expr(e.left, sigma)
    b = eval_expr(e.right, sigma)
    return check_int(a + b if isinstance(e, Add) else a - b)


def subst_expr(e, sigma):
    if isinstance(e, Lit) or not sigma:
        return e
    if isinstance(e, Var):
        if e.name in sigma:
            return lit(sigma[e.name])
        return e
    left = subst_expr(e.left, sigma)
    right = subst_expr(e.right, sigma)
    if left is e.left and right is e.right:
        return e
    return type(e)(left, right)


def fold_expr(e):
    """Replace closed subterms by their value. Open parts are kept as they are."""
    if isinstance(e, (Lit, Var)):
        return e
    left, right = fold_expr(e.left), fold_expr(e.right)
    if isinstance(left, Lit) and isinstance(right, Lit):
        return Lit(left.n + right.n if isinstance(e, Add) else left.n - right.n)
    if left is e.left and right is e.right:
        return e
    return type(e)(left, right)


# -- boolean conditions ----------------------------------------------------------

class BoolExpr(Node):
    __slots__ = ()


class Leq(BoolExpr):
    __slots__ = ("left", "right")
    _fields = ("left", "right")

    def __init__(self, left, right):
        super().__init__(lit(left), lit(right))


class Not(BoolExpr):
    __slots__ = ("arg",)
    _fields = ("arg",)


class And(BoolExpr):
    __slots__ = ("left", "right")
    _fields = ("left", "right")


TRUE = Leq(Lit(0), Lit(1))
FALSE = Leq(Lit(1), Lit(0))


def leq(a, b):
    return Leq(lit(a), lit(b))


def eq(a, b):
    return And(leq(a, b), leq(b, a))


def lt(a, b):
    return Not(leq(b, a))


def gt(a, b):
    return lt(b, a)


def geq(a, b):
    return leq(b, a)


def or_(a, b):
    return Not(And(Not(a), Not(b)))


def implies(a, b):
    return Not(And(a, Not(b)))


def conj(*bs):
    """Left-nested conjunction; the empty conjunction is TRUE."""
    out = None
    for b in bs:
        out = b if out is None else And(out, b)
    return TRUE if out is None else out


def fv_bool(b):
    if isinstance(b, Leq):
        return fv_expr(b.left) | fv_expr(b.right)
    if isinstance(b, Not):
        return fv_bool(b.arg)
    return fv_bool(b.left) | fv_bool(b.right)


def eval_bool(b, sigma=None):
    sigma = sigma or {}
    if isinstance(b, Leq):
        return eval_expr(b.left, sigma) <= eval_expr(b.right, sigma)
    if isinstance(b, Not):
        return not eval_bool(b.arg, sigma)
    return eval_bool(b.left, sigma) and eval_bool(b.right, sigma)


def subst_bool(b, sigma):
    if not sigma:
        return b
    if isinstance(b, Leq):
        left, right = subst_expr(b.left, sigma), subst_expr(b.right, sigma)
        if left is b.left and right is b.right:
            return b
        return Leq(left, right)
    if isinstance(b, Not):
        a = subst_bool(b.arg, sigma)
        return b if a is b.arg else Not(a)
    left, right = subst_bool(b.left, sigma), subst_bool(b.right, sigma)
    if left is b.left and right is b.right:
        return b
    return And(left, right)


def fold_bool(b):
    if isinstance(b, Leq):
        left, right = fold_expr(b.left), fold_expr(b.right)
        if left is b.left and right is b.right:
            return b
        return Leq(left, right)
    if isinstance(b, Not):
        a = fold_bool(b.arg)
        return b if a is b.arg else Not(a)
    left, right = fold_bool(b.left), fold_bool(b.right)
    if left is b.left and right is b.right:
        return b
    return And(left, right)


# -- processes ----------------------------------------------------------------

class Process(Node):
    __slots__ = ()


class Out(Process):
    __slots__ = ("chan", "args")
    _fields = ("chan", "args")

    def __init__(self, chan, args=()):
        super().__init__(chan, tuple(lit(a) for a in args))


class In(Process):
    __slots__ = ("chan", "params", "body")
    _fields = ("chan", "params", "body")

    def __init__(self, chan, params, body):
        params = tuple(params)
        if len(set(params)) != len(params):
            raise ValueError(f"repeated input parameter in {params}")
        super().__init__(chan, params, body)


class If(Process):
    __slots__ = ("cond", "then", "else_")
    _fields = ("cond", "then", "else_")


class Call(Process):
    """K(e1..en) with its actual channels listed against K's formal channels."""
    __slots__ = ("name", "args", "chans")
    _fields = ("name", "args", "chans")

    def __init__(self, name, args=(), chans=()):
        super().__init__(name, tuple(lit(a) for a in args), tuple(chans))


class Nil(Process):
    __slots__ = ()
    _fields = ()


NIL = Nil()


class Par(Process):
    __slots__ = ("left", "right")
    _fields = ("left", "right")


class New(Process):
    __slots__ = ("chan", "body")
    _fields = ("chan", "body")


def par(*ps):
    """Right-nested parallel composition; the empty composition is 0."""
    ps = [p for p in ps]
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


def news(chans, body):
    for c in reversed(list(chans)):
        body = New(c, body)
    return body


def components(p):
    """Flatten top-level Par nodes (left to right)."""
    out = []
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.right)
            stack.append(q.left)
        else:
            out.append(q)
    return out


class Definition:
    __slots__ = ("params", "formals", "body")

    def __init__(self, params, formals, body):
        self.params = tuple(params)
        self.formals = tuple(formals)
        self.body = body

    def __repr__(self):
        return f"Definition({self.params!r}, {self.formals!r}, {self.body!r})"

    def __eq__(self, other):
        return (isinstance(other, Definition) and self.params == other.params
                and self.formals == other.formals and self.body == other.body)

    def instantiate(self, args, chans):
        if len(args) != len(self.params):
            raise ArityMismatch(f"expected {len(self.params)} arguments, got {len(args)}")
        if len(chans) != len(self.formals):
            raise ArityMismatch(f"expected {len(self.formals)} channels, got {len(chans)}")
        body = substitute(self.body, dict(zip(self.params, args)))
        return rename_channels(body, list(zip(chans, self.formals)))


class DefTable(dict):
    """Maps a definition name to its Definition."""

    def merged(self, other):
        out = DefTable(self)
        out.update(other)
        return out


# -- free names -------------------------------------------------------------------

_FV = {}
_FN = {}


def fv(p):
    """Free value variables of a process."""
    r = _FV.get(p)
    if r is not None:
        return r
    if isinstance(p, Out):
        r = frozenset().union(*(fv_expr(e) for e in p.args))
    elif isinstance(p, In):
        r = fv(p.body) - set(p.params)
    elif isinstance(p, If):
        r = fv_bool(p.cond) | fv(p.then) | fv(p.else_)
    elif isinstance(p, Call):
        r = frozenset().union(*(fv_expr(e) for e in p.args))
    elif isinstance(p, Nil):
        r = frozenset()
    elif isinstance(p, Par):
        r = fv(p.left) | fv(p.right)
    else:
        r = fv(p.body)
    if len(_FV) > 500000:
        _FV.clear()
    _FV[p] = r
    return r


def fn(p):
    """Free channel names of a process."""
    r = _FN.get(p)
    if r is not None:
        return r
    if isinstance(p, Out):
        r = frozenset((p.chan,))
    elif isinstance(p, In):
        r = fn(p.body) | {p.chan}
    elif isinstance(p, If):
        r = fn(p.then) | fn(p.else_)
    elif isinstance(p, Call):
        r = frozenset(p.chans)
    elif isinstance(p, Nil):
        r = frozenset()
    elif isinstance(p, Par):
        r = fn(p.left) | fn(p.right)
    else:
        r = fn(p.body) - {p.chan}
    if len(_FN) > 500000:
        _FN.clear()
    _FN[p] = r
    return r


def bound_names(p):
    """Every channel bound by New and every variable bound by In, anywhere."""
    chans, vars_ = set(), set()
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, In):
            vars_.update(q.params)
            stack.append(q.body)
        elif isinstance(q, New):
            chans.add(q.chan)
            stack.append(q.body)
        elif isinstance(q, If):
            stack += [q.then, q.else_]
        elif isinstance(q, Par):
            stack += [q.left, q.right]
    return chans, vars_


def calls(p):
    """Names of all definitions called inside p."""
    out = set()
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Call):
            out.add(q.name)
        elif isinstance(q, In):
            stack.append(q.body)
        elif isinstance(q, New):
            stack.append(q.body)
        elif isinstance(q, If):
            stack += [q.then, q.else_]
        elif isinstance(q, Par):
            stack += [q.left, q.right]
    return out


# -- fresh names ------------------------------------------------------------------

_fresh = itertools.count()


def fresh_chan():
    return f"_k{next(_fresh)}"


def fresh_var():
    return f"_v{next(_fresh)}"


# -- substitution and renaming ------------------------------------------------------

def substitute(p, sigma):
    """Capture-avoiding simultaneous substitution of expressions for variables."""
    sigma = {k: lit(v) for k, v in sigma.items()}
    return _subst(p, sigma)


def _subst(p, sigma):
    if not sigma:
        return p
    live = {k: v for k, v in sigma.items() if k in fv(p)}
    if not live:
        return p
    sigma = live
    if isinstance(p, Out):
        args = tuple(subst_expr(e, sigma) for e in p.args)
        return Out(p.chan, args)
    if isinstance(p, Call):
        return Call(p.name, tuple(subst_expr(e, sigma) for e in p.args), p.chans)
    if isinstance(p, If):
        return If(subst_bool(p.cond, sigma), _subst(p.then, sigma), _subst(p.else_, sigma))
    if isinstance(p, Par):
        return Par(_subst(p.left, sigma), _subst(p.right, sigma))
    if isinstance(p, New):
        return New(p.chan, _subst(p.body, sigma))
    # In: the parameters shadow, and clash with free variables of the images
    inner = {k: v for k, v in sigma.items() if k not in p.params}
    if not inner:
        return p
    danger = frozenset().union(*(fv_expr(v) for v in inner.values()))
    params = list(p.params)
    body = p.body
    ren = {}
    for i, x in enumerate(params):
        if x in danger:
            y = fresh_var()
            ren[x] = Var(y)
            params[i] = y
    if ren:
        body = _subst(body, ren)
    return In(p.chan, params, _subst(body, inner))


def renaming(new, old):
    """Pairs (new, old) for a simultaneous renaming [new/old]."""
    new, old = list(new), list(old)
    if len(new) != len(old):
        raise ArityMismatch(f"renaming lists differ in length ({len(new)} vs {len(old)})")
    return list(zip(new, old))


def rename_channels(p, pairs):
    """Apply the simultaneous channel renaming given as (new, old) pairs."""
    m = {}
    for pair in pairs:
        if len(pair) != 2:
            raise ArityMismatch(f"renaming pair {pair!r} is not of the form (new, old)")
        new, old = pair
        if old in m and m[old] != new:
            raise ValueError(f"channel {old} renamed twice")
        if new != old:
            m[old] = new
    return _ren(p, m)


def _ren(p, m):
    if not m:
        return p
    names = fn(p)
    live = {k: v for k, v in m.items() if k in names}
    if not live:
        return p
    m = live
    if isinstance(p, Out):
        return Out(m.get(p.chan, p.chan), p.args)
    if isinstance(p, In):
        return In(m.get(p.chan, p.chan), p.params, _ren(p.body, m))
    if isinstance(p, Call):
        return Call(p.name, p.args, tuple(m.get(c, c) for c in p.chans))
    if isinstance(p, If):
        return If(p.cond, _ren(p.then, m), _ren(p.else_, m))
    if isinstance(p, Par):
        return Par(_ren(p.left, m), _ren(p.right, m))
    # New
    inner = {k: v for k, v in m.items() if k != p.chan}
    if not inner:
        return p
    c, body = p.chan, p.body
    if c in inner.values():
        d = fresh_chan()
        body = _ren(body, {c: d})
        c = d
    return New(c, _ren(body, inner))
