"""Permission-confined systems: ownership, violations, confined reduction and
safe evaluation (the search for a permission narrative)."""
import itertools
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import BudgetExhausted, CapExceeded, NotWellResourced, StuckOnOpenTerm
from .process import (DEFAULT_BUDGET, branch, canon, chan_name, communicate, key,
                      order_binders, split_canon, unfold)
from .syntax import (Call, If, In, NIL, New, Nil, Node, Out, Par, eval_bool, fn,
                     fresh_chan, fv, fv_bool, fv_expr, news, par, rename_channels,
                     substitute)

DEFAULT_SPLIT_CAP = 14
_CHAN_RE = re.compile(r"_c0_(\d+)$")


class Perm(NamedTuple):
    chan: str
    pol: str  # "?" or "!"

    def __str__(self):
        return f"{self.chan}{self.pol}"


def out_perm(c):
    return Perm(c, "!")


def in_perm(c):
    return Perm(c, "?")


def both_perms(c):
    return frozenset((Perm(c, "?"), Perm(c, "!")))


def perm_set(items):
    """Build a permission set from Perm values or strings such as 'c1?'."""
    if isinstance(items, frozenset) and all(type(x) is Perm for x in items):
        return items
    out = set()
    for x in items:
        if isinstance(x, str):
            if x[-1:] not in "?!" or len(x) < 2:
                raise ValueError(f"bad permission literal {x!r}")
            x = Perm(x[:-1], x[-1])
        out.add(Perm(*x))
    return frozenset(out)


def names(perms):
    return frozenset(p.chan for p in perms)


def rename_perms(perms, m):
    if not any(p.chan in m for p in perms):
        return perms
    return frozenset(Perm(m.get(p.chan, p.chan), p.pol) for p in perms)


# -- systems -----------------------------------------------------------------------------

class System(Node):
    __slots__ = ()


class Leaf(System):
    """A confined process <E>P."""
    __slots__ = ("perms", "proc")
    _fields = ("perms", "proc")

    def __init__(self, perms, proc):
        super().__init__(perm_set(perms), proc)


class SPar(System):
    __slots__ = ("left", "right")
    _fields = ("left", "right")

    def __init__(self, left, right):
        common = owned_perms(left) & owned_perms(right)
        if common:
            raise NotWellResourced(
                "parallel systems share permissions " + ", ".join(sorted(map(str, common))))
        super().__init__(left, right)


class SNew(System):
    __slots__ = ("chan", "body")
    _fields = ("chan", "body")


UNIT = Leaf(frozenset(), NIL)

_OWNED = {}
_SFN = {}


def owned_perms(s):
    r = _OWNED.get(s)
    if r is not None:
        return r
    if isinstance(s, Leaf):
        r = s.perms
    elif isinstance(s, SPar):
        r = owned_perms(s.left) | owned_perms(s.right)
    else:
        r = owned_perms(s.body) - both_perms(s.chan)
    if len(_OWNED) > 300_000:
        _OWNED.clear()
    _OWNED[s] = r
    return r


def separate(s, t):
    return not (owned_perms(s) & owned_perms(t))


def well_resourced(s):
    if isinstance(s, Leaf):
        return True
    if isinstance(s, SPar):
        return well_resourced(s.left) and well_resourced(s.right) and separate(s.left, s.right)
    return well_resourced(s.body)


def sfn(s):
    """Free names of a system, counting the channels named by permissions."""
    r = _SFN.get(s)
    if r is not None:
        return r
    if isinstance(s, Leaf):
        r = fn(s.proc) | names(s.perms)
    elif isinstance(s, SPar):
        r = sfn(s.left) | sfn(s.right)
    else:
        r = sfn(s.body) - {s.chan}
    if len(_SFN) > 300_000:
        _SFN.clear()
    _SFN[s] = r
    return r


def sfv(s):
    if isinstance(s, Leaf):
        return fv(s.proc)
    if isinstance(s, SPar):
        return sfv(s.left) | sfv(s.right)
    return sfv(s.body)


def spar(*systems):
    systems = list(systems)
    if not systems:
        return UNIT
    out = systems[-1]
    for s in reversed(systems[:-1]):
        out = SPar(s, out)
    return out


def snews(chans, body):
    for c in reversed(list(chans)):
        body = SNew(c, body)
    return body


def rename_sys(s, pairs):
    m = {old: new for new, old in pairs if new != old}
    return _ren_sys(s, m)


def _ren_sys(s, m):
    m = {k: v for k, v in m.items() if k in sfn(s)}
    if not m:
        return s
    if isinstance(s, Leaf):
        return Leaf(rename_perms(s.perms, m), rename_channels(s.proc, list((v, k) for k, v in m.items())))
    if isinstance(s, SPar):
        return SPar(_ren_sys(s.left, m), _ren_sys(s.right, m))
    c, body = s.chan, s.body
    inner = {k: v for k, v in m.items() if k != c}
    if c in inner.values():
        d = fresh_chan()
        body = _ren_sys(body, {c: d})
        c = d
    return SNew(c, _ren_sys(body, inner))


def subst_sys(s, sigma):
    if isinstance(s, Leaf):
        return Leaf(s.perms, substitute(s.proc, sigma))
    if isinstance(s, SPar):
        return SPar(subst_sys(s.left, sigma), subst_sys(s.right, sigma))
    return SNew(s.chan, subst_sys(s.body, sigma))


def erase(s):
    """Drop every permission annotation."""
    if isinstance(s, Leaf):
        return s.proc
    if isinstance(s, SPar):
        return Par(erase(s.left), erase(s.right))
    return New(s.chan, erase(s.body))


def strip(s):
    """Same shape with every permission set emptied."""
    if isinstance(s, Leaf):
        return Leaf(frozenset(), s.proc)
    if isinstance(s, SPar):
        return SPar(strip(s.left), strip(s.right))
    return SNew(s.chan, strip(s.body))


# -- canonical form ----------------------------------------------------------------------

def leaf_key(leaf):
    perms = ",".join(sorted(f"{p.chan}{p.pol}" for p in leaf.perms))
    return "{" + perms + "}" + key(leaf.proc)


def _leaf_rename(leaf, pairs):
    m = {old: new for new, old in pairs}
    return Leaf(rename_perms(leaf.perms, m), rename_channels(leaf.proc, pairs))


def _leaf_fn(leaf):
    return fn(leaf.proc) | names(leaf.perms)


_SCANON = {}


def canon_sys(s):
    """Canonical representative of the system structural-equivalence class.

    Leaf bodies are compared up to process structural equivalence.
    """
    r = _SCANON.get(s)
    if r is not None:
        return r
    free = sfn(s)
    binders, leaves, seen = [], [], set()
    stack = [s]
    while stack:
        q = stack.pop()
        if isinstance(q, SPar):
            stack.append(q.right)
            stack.append(q.left)
        elif isinstance(q, SNew):
            c, body = q.chan, q.body
            if not _CHAN_RE.match(c) or c in seen or c in free:
                d = fresh_chan()
                body = rename_sys(body, [(d, c)])
                c = d
            seen.add(c)
            binders.append(c)
            stack.append(body)
        else:
            proc = canon(q.proc, 1)
            if q.perms or not isinstance(proc, Nil):
                leaves.append(q if proc is q.proc else Leaf(q.perms, proc))
    r = assemble_sys(binders, leaves)
    if len(_SCANON) > 200_000:
        _SCANON.clear()
    _SCANON[s] = r
    _SCANON[r] = r
    return r


def assemble_sys(binders, leaves):
    used = set()
    for leaf in leaves:
        used |= _leaf_fn(leaf)
    binders = [b for b in binders if b in used]
    if binders:
        order = order_binders(binders, leaves, _leaf_fn, leaf_key, _leaf_rename)
        pairs = [(chan_name(0, i), b) for i, b in enumerate(order) if chan_name(0, i) != b]
        if pairs:
            leaves = [_leaf_rename(leaf, pairs) for leaf in leaves]
        binders = [chan_name(0, i) for i in range(len(order))]
    leaves.sort(key=leaf_key)
    if not leaves:
        return UNIT
    return snews(binders, _spar_unchecked(leaves))


def _spar_unchecked(leaves):
    # leaves of a canonical form come from a well-resourced system
    out = leaves[-1]
    for leaf in reversed(leaves[:-1]):
        node = object.__new__(SPar)
        object.__setattr__(node, "left", leaf)
        object.__setattr__(node, "right", out)
        object.__setattr__(node, "_h", hash(("SPar", leaf, out)))
        out = node
    return out


def parts(s):
    """Binders and leaves of a canonical system."""
    binders = []
    while isinstance(s, SNew):
        binders.append(s.chan)
        s = s.body
    leaves = []
    while isinstance(s, SPar):
        leaves.append(s.left)
        s = s.right
    if s != UNIT:
        leaves.append(s)
    return binders, leaves


def rebuild(binders, leaves):
    return canon_sys(snews(binders, spar(*leaves)))


def sys_struct_eq(s, t):
    return canon_sys(s) == canon_sys(t)


def quaseq(s, t):
    """Equivalence up to owned permissions."""
    return canon_sys(strip(canon_sys(s))) == canon_sys(strip(canon_sys(t)))


def quaseq_key(s):
    return canon_sys(strip(canon_sys(s)))


# -- violations ----------------------------------------------------------------------------

def leaf_atom(leaf):
    """The single atom of a leaf whose body has no binders, else None."""
    bs, atoms = split_canon(leaf.proc)
    if bs or len(atoms) != 1:
        return None
    return atoms[0]


def leaf_violates(leaf):
    a = leaf_atom(leaf)
    if isinstance(a, Out):
        return Perm(a.chan, "!") not in leaf.perms
    if isinstance(a, In):
        return Perm(a.chan, "?") not in leaf.perms
    return False


def has_violation(s):
    """Path (leaf index in canonical order) of a violating leaf, or None."""
    _, leaves = parts(canon_sys(s))
    for i, leaf in enumerate(leaves):
        if leaf_violates(leaf):
            return (i,)
    return None


# -- reduction ---------------------------------------------------------------------------

def split_perms(perms, cap=DEFAULT_SPLIT_CAP):
    perms = sorted(perms)
    if len(perms) > cap:
        raise CapExceeded(f"permission set of size {len(perms)} exceeds the split cap {cap}")
    for mask in range(1 << len(perms)):
        left = frozenset(p for i, p in enumerate(perms) if mask >> i & 1)
        yield left, frozenset(perms) - left


def _lift_binder(leaf, c):
    """cLcl on binder c of the leaf body."""
    bs, atoms = split_canon(leaf.proc)
    d = fresh_chan()
    rest = [b for b in bs if b != c]
    body = rename_channels(news(rest, par(*atoms)), [(d, c)])
    return SNew(d, Leaf(leaf.perms | both_perms(d), body))


def local_steps(leaf, defs):
    """Steps of a single leaf that do not involve other leaves or binders.

    Yields (rule, replacement systems).  Splits are not included.
    """
    bs, atoms = split_canon(leaf.proc)
    if bs:
        for c in bs:
            yield "cLcl", [_lift_binder(leaf, c)]
        return
    if not atoms:
        if leaf.perms:
            yield "cDsc", []
        return
    if len(atoms) != 1:
        return
    a = atoms[0]
    if isinstance(a, If):
        rule, b = branch(a)
        yield "c" + rule[1:], [Leaf(leaf.perms, b)]
    elif isinstance(a, Call):
        yield "cPrc", [Leaf(leaf.perms, unfold(a, defs))]


def comm_pairs(leaves):
    """(sender index, receiver index) pairs allowed by cCom."""
    senders = {}
    for i, leaf in enumerate(leaves):
        a = leaf_atom(leaf)
        if isinstance(a, Out) and Perm(a.chan, "!") in leaf.perms:
            senders.setdefault(a.chan, []).append(i)
    for j, leaf in enumerate(leaves):
        a = leaf_atom(leaf)
        if isinstance(a, In) and Perm(a.chan, "?") in leaf.perms:
            for i in senders.get(a.chan, ()):
                if len(leaf_atom(leaves[i]).args) == len(a.params):
                    yield i, j


def do_comm(leaves, i, j):
    out, inp = leaf_atom(leaves[i]), leaf_atom(leaves[j])
    return Leaf(leaves[i].perms | leaves[j].perms, communicate(out, inp))


def tighten_steps(binders, leaves):
    """(leaf index, binder, new leaf) for every cTgh redex."""
    for b in binders:
        bp = both_perms(b)
        for i, leaf in enumerate(leaves):
            if leaf.perms & bp and b not in fn(leaf.proc):
                yield i, b, Leaf(leaf.perms - bp, leaf.proc)


def splittable(leaf):
    bs, atoms = split_canon(leaf.proc)
    return not bs and len(atoms) >= 2


def split_leaf(leaf, left_perms):
    _, atoms = split_canon(leaf.proc)
    return [Leaf(left_perms, atoms[0]), Leaf(leaf.perms - left_perms, par(*atoms[1:]))]


def sys_step_labeled(s, defs, split_cap=DEFAULT_SPLIT_CAP):
    """Every one-step successor as (rule, redex path, canonical successor)."""
    s = canon_sys(s)
    if sfv(s):
        raise StuckOnOpenTerm(f"free variables {sorted(sfv(s))}")
    binders, leaves = parts(s)
    out = []

    def replace(idx, new):
        rest = [leaf for k, leaf in enumerate(leaves) if k not in idx]
        return rebuild(binders, rest + list(new))

    for i, leaf in enumerate(leaves):
        for rule, new in local_steps(leaf, defs):
            out.append((rule, (i,), replace((i,), new)))
        if splittable(leaf):
            for left, _ in split_perms(leaf.perms, split_cap):
                out.append(("cSpl", (i,), replace((i,), split_leaf(leaf, left))))
    for i, j in comm_pairs(leaves):
        out.append(("cCom", (i, j), replace((i, j), [do_comm(leaves, i, j)])))
    for i, b, new in tighten_steps(binders, leaves):
        out.append(("cTgh", (i,), replace((i,), [new])))
    return out


def sys_step(s, defs, split_cap=DEFAULT_SPLIT_CAP):
    return {t for _, _, t in sys_step_labeled(s, defs, split_cap)}


def is_stable_sys(s, defs, split_cap=DEFAULT_SPLIT_CAP):
    return not sys_step_labeled(s, defs, split_cap)


def is_safely_stable(s, defs, split_cap=DEFAULT_SPLIT_CAP, cross_check=True):
    s = canon_sys(s)
    verdict = has_violation(s) is None and is_stable_sys(s, defs, split_cap)
    if cross_check:
        shape = safe_shape(s)
        if shape != verdict:
            raise AssertionError(f"structural safe-stability check disagrees on {s}")
    return verdict


def stable_shape(s):
    """The literal structural characterisation of safely stable systems:
    mismatching outputs and inputs, each holding its own-polarity permission."""
    _, leaves = parts(canon_sys(s))
    outs, ins = set(), set()
    for leaf in leaves:
        a = leaf_atom(leaf)
        if isinstance(a, Out) and Perm(a.chan, "!") in leaf.perms:
            outs.add(a.chan)
        elif isinstance(a, In) and Perm(a.chan, "?") in leaf.perms:
            ins.add(a.chan)
        else:
            return False
    return not (outs & ins)


def safe_shape(s):
    """stable_shape plus the absence of scope-tightening redexes, which the
    literal characterisation does not mention."""
    s = canon_sys(s)
    if not stable_shape(s):
        return False
    binders, leaves = parts(s)
    return next(tighten_steps(binders, leaves), None) is None


# -- safe evaluation -----------------------------------------------------------------------

@dataclass
class TraceStep:
    rule: str
    path: tuple
    system: System


@dataclass
class SafeResult:
    system: System
    trace: list = field(default_factory=list)


class _Search:
    def __init__(self, defs, budget, split_cap, goal):
        self.defs = defs
        self.budget = budget
        self.split_cap = split_cap
        self.goal = goal
        self.failed = set()
        self.count = 0
        self.complete = True
        self.deepest = None

    def tick(self):
        self.count += 1
        if self.count > self.budget:
            raise BudgetExhausted(f"safe evaluation stopped after {self.budget} states")

    def normalize(self, s, trace):
        """Apply forced steps (everything except cSpl and cTgh) until none is left."""
        while True:
            self.tick()
            binders, leaves = parts(s)
            done = False
            for i, leaf in enumerate(leaves):
                for rule, new in local_steps(leaf, self.defs):
                    rest = [x for k, x in enumerate(leaves) if k != i]
                    s = rebuild(binders, rest + new)
                    trace.append(TraceStep(rule, (i,), s))
                    done = True
                    break
                if done:
                    break
            if done:
                continue
            pair = next(comm_pairs(leaves), None)
            if pair is not None:
                i, j = pair
                rest = [x for k, x in enumerate(leaves) if k not in (i, j)]
                s = rebuild(binders, rest + [do_comm(leaves, i, j)])
                trace.append(TraceStep("cCom", (i, j), s))
                continue
            return s

    def tighten(self, s, trace):
        while True:
            binders, leaves = parts(s)
            red = next(tighten_steps(binders, leaves), None)
            if red is None:
                return s
            i, _, new = red
            rest = [x for k, x in enumerate(leaves) if k != i]
            s = rebuild(binders, rest + [new])
            trace.append(TraceStep("cTgh", (i,), s))

    def run(self, s):
        trace = []
        s = self.normalize(s, trace)
        if s in self.failed:
            return None
        if has_violation(s) is not None:
            self.deepest = s
            self.failed.add(s)
            return None
        binders, leaves = parts(s)
        idx = next((i for i, leaf in enumerate(leaves) if splittable(leaf)), None)
        if idx is None:
            final = self.tighten(s, trace)
            if has_violation(final) is None and (self.goal is None or self.goal(final)):
                return trace
            self.failed.add(s)
            return None
        leaf = leaves[idx]
        rest = [x for k, x in enumerate(leaves) if k != idx]
        for left in ordered_partitions(leaf, binders, self.defs, self.split_cap, rest):
            child = rebuild(binders, rest + split_leaf(leaf, left))
            if child in self.failed:
                continue
            sub = self.run(child)
            if sub is not None:
                return trace + [TraceStep("cSpl", (idx,), child)] + sub
        self.failed.add(s)
        return None


def evaluate_safe(s, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP, goal=None):
    """Find a safe evaluation S =>* T with T safely stable.

    Returns SafeResult or None when the search space is exhausted without one;
    raises BudgetExhausted when the state budget runs out first.
    """
    s = canon_sys(s)
    search = _Search(defs, budget, split_cap, goal)
    trace = search.run(s)
    if trace is None:
        return None
    final = trace[-1].system if trace else s
    return SafeResult(final, trace)


def deepest_violation(s, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP):
    """Some violating state met while searching, for diagnostics."""
    search = _Search(defs, budget, split_cap, None)
    try:
        search.run(canon_sys(s))
    except BudgetExhausted:
        pass
    return search.deepest


def certify_deterministic(s, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP):
    res = evaluate_safe(s, defs, budget, split_cap)
    if res is None:
        return None
    return canon(erase(res.system))


# -- exhaustive exploration ------------------------------------------------------------------

@dataclass
class SysGraph:
    root: System
    edges: dict = field(default_factory=dict)
    truncated: bool = False


def explore_sys(s, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP):
    root = canon_sys(s)
    g = SysGraph(root)
    g.edges[root] = None
    frontier, expanded = [root], 0
    while frontier:
        nxt = []
        for n in frontier:
            if expanded >= budget:
                g.truncated = True
                return g
            expanded += 1
            succ = []
            for _, _, t in sys_step_labeled(n, defs, split_cap):
                if t not in succ:
                    succ.append(t)
            g.edges[n] = succ
            for t in succ:
                if t not in g.edges:
                    g.edges[t] = None
                    nxt.append(t)
        frontier = nxt
    return g


def safe_terminals(s, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP):
    """Every safely stable system reachable from s (with the search's step order).

    Returns (terminals, complete) where complete is False if the budget ran out.
    """
    search = _Search(defs, budget, split_cap, None)
    found = []
    seen = set()

    def visit(state):
        trace = []
        state = search.normalize(state, trace)
        if state in seen:
            return
        seen.add(state)
        if has_violation(state) is not None:
            return
        binders, leaves = parts(state)
        idx = next((i for i, leaf in enumerate(leaves) if splittable(leaf)), None)
        if idx is None:
            final = search.tighten(state, trace)
            if has_violation(final) is None and final not in found:
                found.append(final)
            return
        leaf = leaves[idx]
        rest = [x for k, x in enumerate(leaves) if k != idx]
        for left in ordered_partitions(leaf, binders, defs, split_cap, rest):
            visit(rebuild(binders, rest + split_leaf(leaf, left)))

    try:
        visit(canon_sys(s))
    except BudgetExhausted:
        return found, False
    return found, True


# -- partition ordering --------------------------------------------------------------------

USAGE_UNFOLDS = 400
USAGE_DEPTH = 8


def usage(p, defs, limit=USAGE_UNFOLDS):
    """Permissions p may exercise, each with the (input prefixes, depth) of its uses.

    Calls are unfolded (also with open arguments) up to `limit` times and
    USAGE_DEPTH deep, and conditions are decided when closed; this is only a
    search heuristic.
    The summary of each call is memoised relative to its position.
    """
    budget = [limit]
    cut = [False]
    memo = getattr(defs, "usage_memo", None)
    if memo is None:
        memo = {}
        try:
            defs.usage_memo = memo
        except AttributeError:
            pass
    if len(memo) > 20000:
        memo.clear()

    def use(found, perm, prefixes, depth):
        lst = found.setdefault(perm, [])
        if len(lst) < 8:
            lst.append((prefixes, depth))

    def walk(q, found, prefixes, depth, path):
        if isinstance(q, Out):
            use(found, Perm(q.chan, "!"), prefixes, depth)
        elif isinstance(q, In):
            use(found, Perm(q.chan, "?"), prefixes, depth)
            walk(q.body, found, prefixes | {q.chan}, depth + 1, path)
        elif isinstance(q, If):
            if not fv_bool(q.cond):
                walk(q.then if eval_bool(q.cond) else q.else_, found, prefixes, depth, path)
            else:
                walk(q.then, found, prefixes, depth, path)
                walk(q.else_, found, prefixes, depth, path)
        elif isinstance(q, Par):
            walk(q.left, found, prefixes, depth, path)
            walk(q.right, found, prefixes, depth, path)
        elif isinstance(q, New):
            inner = {}
            walk(q.body, inner, prefixes, depth, path)
            for perm, uses in inner.items():
                if perm.chan != q.chan:
                    for u in uses:
                        use(found, perm, *u)
        elif isinstance(q, Call):
            # open arguments are abstracted, so recursion on them closes quickly
            sig = (q.name, tuple("*" if fv_expr(e) else key_expr(e) for e in q.args), q.chans)
            summary = memo.get(sig)
            if summary is None:
                if sig in path or q.name not in defs:
                    return
                if budget[0] <= 0 or len(path) >= USAGE_DEPTH:
                    cut[0] = True
                    return
                budget[0] -= 1
                body = defs[q.name].instantiate(list(q.args), q.chans)
                summary = {}
                was = cut[0]
                cut[0] = False
                walk(body, summary, frozenset(), 0, path | {sig})
                if not cut[0]:
                    memo[sig] = summary
                cut[0] = cut[0] or was
            for perm, uses in summary.items():
                for pre, d in uses:
                    use(found, perm, prefixes | pre, depth + d)

    found = {}
    walk(p, found, frozenset(), 0, frozenset())
    return found


def key_expr(e):
    from .process import _ekey
    return _ekey(e)


def _rank(uses, transfer):
    best = None
    for prefixes, depth in uses:
        r = (bool(prefixes & transfer), depth)
        if best is None or r < best:
            best = r
    return best


def ordered_partitions(leaf, binders, defs, split_cap=DEFAULT_SPLIT_CAP, others=()):
    """Left permission sets for splitting `leaf`, most plausible first.

    The first atom goes left and the rest right.  A permission some other leaf
    will need goes to the side that sends on the channel that leaf waits on;
    otherwise it goes to the side that uses it first, and permissions neither
    side mentions follow internal messages.  All partitions are produced
    eventually, so the ordering only affects speed.
    """
    perms = sorted(leaf.perms)
    if len(perms) > split_cap:
        raise CapExceeded(f"permission set of size {len(perms)} exceeds the split cap {split_cap}")
    _, atoms = split_canon(leaf.proc)
    a, rest = atoms[0], par(*atoms[1:])
    ua, ur = usage(a, defs), usage(rest, defs)
    # messages already pending elsewhere do not make one side wait for the other
    pending = set()
    # channels another leaf waits on before it can use a permission
    wanted = {}
    for o in others:
        pending |= {q.chan for q in split_canon(o.proc)[1] if isinstance(q, Out)}
        for perm, uses in usage(o.proc, defs).items():
            if perm not in o.perms:
                first = min(d for _, d in uses)
                for prefixes, d in uses:
                    if d == first:
                        wanted.setdefault(perm, set()).update(prefixes)
    ta = {p.chan for p in ur if p.pol == "!"} - pending
    tr = {p.chan for p in ua if p.pol == "!"} - pending

    def carrier(ps):
        kinds = [not isinstance(q, Out) for q in ps]
        internal = [isinstance(q, Out) and q.chan in binders for q in ps]
        return (any(kinds), any(internal))

    ca, cr = carrier([a]), carrier(atoms[1:])
    free_left = ca >= cr
    outs_a = {q.chan for q in ua if q.pol == "!"}
    outs_r = {q.chan for q in ur if q.pol == "!"}
    prefer = []
    for p in perms:
        ra = _rank(ua[p], ta) if p in ua else None
        rr = _rank(ur[p], tr) if p in ur else None
        if ra is not None and rr is not None:
            prefer.append(ra <= rr)
        elif ra is not None:
            prefer.append(True)
        elif rr is not None:
            prefer.append(False)
        elif p in wanted and (wanted[p] & outs_a) and not (wanted[p] & outs_r):
            prefer.append(True)
        elif p in wanted and (wanted[p] & outs_r) and not (wanted[p] & outs_a):
            prefer.append(False)
        elif ca[1] != cr[1]:
            # unused permissions travel with an internal message
            prefer.append(ca[1])
        elif p.pol == "?" and (p.chan in outs_a) != (p.chan in outs_r):
            # an unused input permission stays away from the side sending on it
            prefer.append(p.chan in outs_r)
        else:
            prefer.append(free_left)
    n = len(perms)
    for k in range(n + 1):
        for flips in itertools.combinations(range(n), k):
            fl = set(flips)
            yield frozenset(p for i, p in enumerate(perms) if prefer[i] != (i in fl))


# -- printing -------------------------------------------------------------------------------

def show_system(s, defs=None, prec=0):
    from .printer import readable, show_perms, show_process
    if isinstance(s, Leaf):
        return f"<{show_perms(s.perms)}>{{ {show_process(readable(s.proc), defs)} }}"
    if isinstance(s, SNew):
        chans = []
        while isinstance(s, SNew):
            chans.append(s.chan)
            s = s.body
        shown = [_display_chan(c) for c in chans]
        body = rename_sys(s, [(d, c) for d, c in zip(shown, chans) if d != c])
        return f"new {', '.join(shown)}.({show_system(body, defs)})"
    txt = f"{show_system(s.left, defs, 1)} || {show_system(s.right, defs, 0)}"
    return f"({txt})" if prec else txt


def _display_chan(c):
    m = re.match(r"_c(\d+)_(\d+)$", c)
    if m:
        return f"h{m.group(1)}x{m.group(2)}"
    m = re.match(r"_k(\d+)$", c)
    if m:
        return f"k{m.group(1)}x"
    return c
