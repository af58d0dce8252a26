"""Structural equivalence, reduction and evaluation of bare processes.

Processes are compared through a canonical form: every restriction that can be
hoisted is hoisted, unused restrictions are dropped, nil components vanish and
the remaining atoms are sorted.  Bound names are renamed to reserved names that
record their nesting depth (``_c{d}_{i}`` for channels, ``_x{d}_{i}`` for input
parameters), which makes alpha-equivalent terms literally equal.
"""
import itertools
import re
from dataclasses import dataclass, field

from .errors import BudgetExhausted, StuckOnOpenTerm, UnknownDefinition
from .syntax import (Call, If, In, Lit, New, Nil, Out, Par, Var, eval_bool,
                     eval_expr, fn, fold_bool, fold_expr, fresh_chan, fv, fv_bool,
                     fv_expr, news, par, rename_channels, substitute)

DEFAULT_BUDGET = 10_000
PERMUTATION_LIMIT = 720

_CHAN_RE = re.compile(r"_c(\d+)_(\d+)$")


def chan_name(depth, i):
    return f"_c{depth}_{i}"


def var_name(depth, i):
    return f"_x{depth}_{i}"


# -- sort keys --------------------------------------------------------------------

_KEYS = {}


def key(p):
    """A string that totally orders syntax nodes; equal nodes share a key."""
    k = _KEYS.get(p)
    if k is None:
        k = _key(p)
        if len(_KEYS) > 400_000:
            _KEYS.clear()
        _KEYS[p] = k
    return k


def _ekey(e):
    if isinstance(e, Lit):
        return str(e.n)
    if isinstance(e, Var):
        return e.name
    op = "+" if type(e).__name__ == "Add" else "-"
    return f"({_ekey(e.left)}{op}{_ekey(e.right)})"


def _bkey(b):
    name = type(b).__name__
    if name == "Leq":
        return f"[{_ekey(b.left)}<={_ekey(b.right)}]"
    if name == "Not":
        return f"~{_bkey(b.arg)}"
    return f"[{_bkey(b.left)}&{_bkey(b.right)}]"


def _key(p):
    # the leading letter fixes the order between kinds of atoms:
    # outputs first, then inputs, conditionals and calls
    if isinstance(p, Out):
        return f"A{p.chan}!(" + ",".join(_ekey(e) for e in p.args) + ")"
    if isinstance(p, In):
        return f"B{p.chan}?(" + ",".join(p.params) + ")." + key(p.body)
    if isinstance(p, If):
        return f"C{_bkey(p.cond)}{{{key(p.then)}}}{{{key(p.else_)}}}"
    if isinstance(p, Call):
        return (f"D{p.name}(" + ",".join(_ekey(e) for e in p.args) + ")["
                + ",".join(p.chans) + "]")
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return f"<{key(p.left)}|{key(p.right)}>"
    return f"N{p.chan}.{key(p.body)}"


# -- canonical form -------------------------------------------------------------------

_CANON = {}


def canon(p, depth=0):
    """Canonical representative of the structural-equivalence class of p."""
    ck = (p, depth)
    r = _CANON.get(ck)
    if r is not None:
        return r
    binders, atoms = flatten(p, depth)
    atoms = [canon_atom(a, depth + 1) for a in atoms]
    r = assemble(binders, atoms, depth)
    if len(_CANON) > 300_000:
        _CANON.clear()
    _CANON[ck] = r
    _CANON[(r, depth)] = r
    return r


def flatten(p, depth):
    """Split p into hoisted restriction names and its non-parallel atoms.

    Binders keep their name when it already is a canonical name of this depth
    and is unambiguous; every other binder is renamed apart.
    """
    free = fn(p)
    binders, atoms, seen = [], [], set()
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.right)
            stack.append(q.left)
        elif isinstance(q, Nil):
            continue
        elif isinstance(q, New):
            c, body = q.chan, q.body
            m = _CHAN_RE.match(c)
            if not (m and int(m.group(1)) == depth) or c in seen or c in free:
                d = fresh_chan()
                body = rename_channels(body, [(d, c)])
                c = d
            seen.add(c)
            binders.append(c)
            stack.append(body)
        else:
            atoms.append(q)
    return binders, atoms


def canon_atom(a, depth):
    """Canonicalize the inside of an atom whose own binders live at `depth`."""
    ck = (a, -depth - 1)
    r = _CANON.get(ck)
    if r is not None:
        return r
    if isinstance(a, Out):
        r = Out(a.chan, tuple(fold_expr(e) for e in a.args))
    elif isinstance(a, Call):
        r = Call(a.name, tuple(fold_expr(e) for e in a.args), a.chans)
    elif isinstance(a, If):
        r = If(fold_bool(a.cond), canon(a.then, depth), canon(a.else_, depth))
    elif isinstance(a, In):
        targets = [var_name(depth, i) for i in range(len(a.params))]
        body = a.body
        if list(a.params) != targets:
            tmp = [f"_v~{i}" for i in range(len(a.params))]
            body = substitute(body, {x: Var(t) for x, t in zip(a.params, tmp)})
            body = substitute(body, {t: Var(y) for t, y in zip(tmp, targets)})
        r = In(a.chan, targets, canon(body, depth))
    else:
        raise TypeError(f"not an atom: {a!r}")
    if r == a:
        r = a
    _CANON[ck] = r
    return r


def assemble(binders, atoms, depth):
    """Garbage-collect unused binders, name the rest canonically, sort atoms."""
    used = set()
    for a in atoms:
        used |= fn(a)
    binders = [b for b in binders if b in used]
    if binders:
        order = order_binders(binders, atoms)
        target = {b: chan_name(depth, i) for i, b in enumerate(order)}
        pairs = [(t, b) for b, t in target.items() if t != b]
        if pairs:
            atoms = [rename_channels(a, pairs) for a in atoms]
        binders = [target[b] for b in order]
    atoms.sort(key=key)
    return news(binders, par(*atoms))


def _signature(b, binders, atoms, fnf, keyf, renamef):
    others = [c for c in binders if c != b]
    sig = []
    for a in atoms:
        names = fnf(a)
        if b not in names:
            continue
        pairs = [("_m~", b)] + [("_o~", c) for c in others if c in names]
        sig.append(keyf(renamef(a, pairs)))
    return tuple(sorted(sig))


def order_binders(binders, atoms, fnf=fn, keyf=key, renamef=rename_channels):
    """Order binders by a name-independent signature, breaking ties by search.

    The callbacks let systems reuse this for their leaves.
    """
    if len(binders) == 1:
        return list(binders)
    sigs = {b: _signature(b, binders, atoms, fnf, keyf, renamef) for b in binders}
    groups = {}
    for b in binders:
        groups.setdefault(sigs[b], []).append(b)
    ordered = [groups[s] for s in sorted(groups)]
    if all(len(g) == 1 for g in ordered):
        return [g[0] for g in ordered]
    total = 1
    for g in ordered:
        for i in range(2, len(g) + 1):
            total *= i
    if total > PERMUTATION_LIMIT:
        return [b for g in ordered for b in sorted(g)]
    best, best_key = None, None
    for choice in itertools.product(*(itertools.permutations(g) for g in ordered)):
        order = [b for g in choice for b in g]
        pairs = [(chan_name(0, i) + "~", b) for i, b in enumerate(order)]
        k = tuple(sorted(keyf(renamef(a, pairs)) for a in atoms))
        if best_key is None or k < best_key:
            best, best_key = order, k
    return best


def struct_eq(p, q):
    return canon(p) == canon(q)


def split_canon(p):
    """Binders and atoms of a canonical process."""
    binders = []
    while isinstance(p, New):
        binders.append(p.chan)
        p = p.body
    return binders, [a for a in _components(p)]


def _components(p):
    out = []
    while isinstance(p, Par):
        out.append(p.left)
        p = p.right
    if not isinstance(p, Nil):
        out.append(p)
    return out


# -- reduction --------------------------------------------------------------------------

def _closed_values(args):
    for e in args:
        if fv_expr(e):
            raise StuckOnOpenTerm(f"open expression {e!r} in a redex")
    return [Lit(eval_expr(e)) for e in args]


def unfold(call, defs):
    if call.name not in defs:
        raise UnknownDefinition(call.name)
    return defs[call.name].instantiate(_closed_values(call.args), call.chans)


def branch(atom):
    if fv_bool(atom.cond):
        raise StuckOnOpenTerm(f"open condition in {atom!r}")
    if eval_bool(atom.cond):
        return "rThn", atom.then
    return "rEls", atom.else_


def communicate(out, inp):
    vals = _closed_values(out.args)
    return substitute(inp.body, dict(zip(inp.params, vals)))


def redexes(atoms, defs):
    """Yield (rule, path, replaced indices, new process) for every redex."""
    outs = {}
    for i, a in enumerate(atoms):
        if isinstance(a, Out):
            outs.setdefault(a.chan, []).append(i)
    for i, a in enumerate(atoms):
        if isinstance(a, If):
            rule, b = branch(a)
            yield rule, (i,), (i,), b
        elif isinstance(a, Call):
            yield "rPrc", (i,), (i,), unfold(a, defs)
        elif isinstance(a, In):
            for j in outs.get(a.chan, ()):
                o = atoms[j]
                if len(o.args) == len(a.params):
                    yield "rCom", (j, i), (j, i), communicate(o, a)


def step_labeled(p, defs):
    """All one-step successors of p as (rule, redex path, canonical successor)."""
    p = canon(p)
    if fv(p):
        raise StuckOnOpenTerm(f"free variables {sorted(fv(p))}")
    binders, atoms = split_canon(p)
    out = []
    for rule, path, used, new in redexes(atoms, defs):
        rest = [a for k, a in enumerate(atoms) if k not in used]
        out.append((rule, path, canon(news(binders, par(*(rest + [new]))))))
    return out


def step(p, defs):
    return {s for _, _, s in step_labeled(p, defs)}


def is_stable(p, defs):
    return not step_labeled(p, defs)


@dataclass
class ReductionGraph:
    root: object
    edges: dict = field(default_factory=dict)
    truncated: bool = False

    @property
    def nodes(self):
        return set(self.edges)

    def stable(self):
        return [n for n, succ in self.edges.items() if succ is not None and not succ]


def explore(p, defs, budget=DEFAULT_BUDGET):
    """Breadth-first reduction graph of p, at most `budget` expanded states."""
    root = canon(p)
    g = ReductionGraph(root)
    frontier = [root]
    g.edges[root] = None
    expanded = 0
    while frontier:
        nxt = []
        for n in frontier:
            if expanded >= budget:
                g.truncated = True
                return g
            expanded += 1
            succ = []
            for _, _, s in step_labeled(n, defs):
                if s not in succ:
                    succ.append(s)
            g.edges[n] = succ
            for s in succ:
                if s not in g.edges:
                    g.edges[s] = None
                    nxt.append(s)
        frontier = nxt
    return g


def evaluate(p, defs, budget=DEFAULT_BUDGET):
    """Set of stable canonical processes reachable from p."""
    g = explore(p, defs, budget)
    found = frozenset(g.stable())
    if g.truncated:
        raise BudgetExhausted(f"evaluation stopped after {budget} states",
                              partial=found, truncated=True)
    return found


# -- determinism ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Deterministic:
    result: object


@dataclass(frozen=True)
class NonDeterministic:
    first: object
    second: object
    leaves: frozenset = frozenset()


@dataclass(frozen=True)
class Diverges:
    lasso: tuple
    cycle_start: int = 0


@dataclass(frozen=True)
class Unknown:
    reason: str


def find_cycle(g):
    """A path from the root that ends in a cycle, or None."""
    color = {}
    for start in [g.root]:
        stack = [(start, iter(g.edges.get(start) or ()))]
        path = [start]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                c = color.get(s, 0)
                if c == 1:
                    return tuple(path) + (s,), path.index(s)
                if c == 0:
                    color[s] = 1
                    stack.append((s, iter(g.edges.get(s) or ())))
                    path.append(s)
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
                path.pop()
    return None


def is_deterministic(p, defs, budget=DEFAULT_BUDGET):
    g = explore(p, defs, budget)
    leaves = sorted(g.stable(), key=key)
    if len(leaves) >= 2:
        return NonDeterministic(leaves[0], leaves[1], frozenset(leaves))
    cyc = find_cycle(g)
    if cyc is not None:
        return Diverges(*cyc)
    if g.truncated:
        return Unknown(f"state budget {budget} exhausted")
    return Deterministic(leaves[0])
