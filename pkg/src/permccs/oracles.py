"""Randomised checks of the metatheory over small generated systems, and a
mutation generator for proof trees.

Every suite draws systems from `generate_system`, which deals each of c? and
c! for every channel to at most one leaf, so the systems are well resourced
by construction.  A suite returns a `SuiteReport` that serialises to JSON.
"""
import dataclasses
import json
import random
from dataclasses import dataclass

from .errors import BudgetExhausted, PermCCSError
from .logic import (Any_, Blk, EMP, PermEnv, State, formulas_separate, satisfies, sep)
from .printer import show
from .process import canon, explore, find_cycle, step
from .syntax import DefTable, If, In, Lit, NIL, New, Out, Par, Var, leq
from .systems import (Leaf, Perm, SNew, SPar, erase, evaluate_safe, explore_sys,
                      has_violation, is_safely_stable, leaf_atom, owned_perms, parts, quaseq,
                      separate, show_system, spar, sys_step, sys_step_labeled,
                      well_resourced)


@dataclass(frozen=True)
class GenSpec:
    max_atoms: int = 4
    max_channels: int = 3
    max_depth: int = 3
    values: tuple = (0, 3)
    seed: int = 0
    count: int = 500
    state_budget: int = 300


@dataclass
class SuiteReport:
    suite: str
    seed: int
    systems: int = 0
    checked: int = 0
    vacuous: int = 0
    truncated: int = 0
    failures: int = 0
    first_counterexample: object = None

    @property
    def ok(self):
        return self.failures == 0

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["ok"] = self.ok
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# -- generation -----------------------------------------------------------------------------

class _Gen:
    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.nvars = 0
        self.nlocal = 0

    def value(self, scope):
        lo, hi = self.spec.values
        if scope and self.rng.random() < 0.5:
            return Var(self.rng.choice(scope))
        return Lit(self.rng.randint(lo, hi))

    def proc(self, chans, scope, depth):
        r = self.rng.random()
        if depth <= 0 or r < 0.25:
            if self.rng.random() < 0.15:
                return NIL
            return Out(self.rng.choice(chans), [self.value(scope)])
        if r < 0.6:
            x = f"x{self.nvars}"
            self.nvars += 1
            return In(self.rng.choice(chans), [x], self.proc(chans, scope + [x], depth - 1))
        if r < 0.75:
            cond = leq(self.value(scope), self.value(scope))
            return If(cond, self.proc(chans, scope, depth - 1), self.proc(chans, scope, depth - 1))
        if r < 0.9:
            return Par(self.proc(chans, scope, depth - 1), self.proc(chans, scope, depth - 1))
        d = f"l{self.nlocal}"
        self.nlocal += 1
        return New(d, self.proc(chans + [d], scope, depth - 1))


def generate_system(spec, rng):
    """A random closed, well-resourced system within the bounds of spec."""
    g = _Gen(spec, rng)
    nchan = rng.randint(1, spec.max_channels)
    chans = [f"c{k}" for k in range(nchan)]
    natoms = rng.randint(1, spec.max_atoms)
    procs = [g.proc(chans, [], rng.randint(0, spec.max_depth)) for _ in range(natoms)]
    perms = [set() for _ in procs]
    used = [_prefixes(p) for p in procs]
    for c in chans:
        for pol in "?!":
            # usually the permission goes to a leaf that acts on c with that polarity
            users = [k for k in range(natoms) if (c, pol) in used[k]]
            if users and rng.random() < 0.75:
                owner = rng.choice(users)
            else:
                owner = rng.randrange(natoms + 1)
            if owner < natoms:
                perms[owner].add(Perm(c, pol))
    s = spar(*[Leaf(frozenset(e), p) for e, p in zip(perms, procs)])
    if nchan > 1 and rng.random() < 0.25:
        s = SNew(chans[-1], s)
    return s


def _prefixes(p):
    """(channel, polarity) of every prefix in p."""
    if isinstance(p, Out):
        return {(p.chan, "!")}
    if isinstance(p, In):
        return {(p.chan, "?")} | _prefixes(p.body)
    if isinstance(p, If):
        return _prefixes(p.then) | _prefixes(p.else_)
    if isinstance(p, Par):
        return _prefixes(p.left) | _prefixes(p.right)
    if isinstance(p, New):
        return _prefixes(p.body)
    return set()


def generate_systems(spec):
    rng = random.Random(spec.seed)
    return [generate_system(spec, rng) for _ in range(spec.count)]


# -- suites ----------------------------------------------------------------------------------

_DEFS = DefTable()


def _graph(s, spec):
    return explore_sys(s, _DEFS, budget=spec.state_budget)


def _edges(g):
    for n, succ in g.edges.items():
        for t in succ or ():
            yield n, t


def _fail(report, detail):
    report.failures += 1
    if report.first_counterexample is None:
        report.first_counterexample = detail


def _check_locality(s, spec, report):
    g = _graph(s, spec)
    for a, b in _edges(g):
        if not owned_perms(b) <= owned_perms(a):
            return _fail(report, {"from": show_system(a), "to": show_system(b)})
    return g


def _check_resourcing(s, spec, report):
    g = _graph(s, spec)
    for a, b in _edges(g):
        if not well_resourced(b):
            return _fail(report, {"from": show_system(a), "to": show_system(b)})
    return g


def _check_violation(s, spec, report):
    g = _graph(s, spec)
    for a, b in _edges(g):
        if has_violation(a) is not None and has_violation(b) is None:
            return _fail(report, {"from": show_system(a), "to": show_system(b)})
    return g


def _check_confluence(s, spec, report):
    g = _graph(s, spec)
    succ_cache = {}

    def succ(t):
        if t not in succ_cache:
            e = g.edges.get(t)
            succ_cache[t] = set(e) if e is not None else sys_step(t, _DEFS)
        return succ_cache[t]

    for n, ts in g.edges.items():
        ts = ts or []
        for i, t1 in enumerate(ts):
            for t2 in ts[i + 1:]:
                if quaseq(t1, t2) or succ(t1) & succ(t2):
                    continue
                return _fail(report, {"from": show_system(n), "left": show_system(t1),
                                      "right": show_system(t2)})
    return g


def _core_succ(t):
    return {u for rule, _, u in sys_step_labeled(t, _DEFS) if rule != "cTgh"}


def _check_confluence_core(s, spec, report):
    """The diamond for every rule except scope tightening, which can break it:
    tightening drops a permission that a competing communication would instead
    hand to a leaf still using the channel, where it stays for good."""
    g = _graph(s, spec)
    succ_cache = {}

    def succ(t):
        if t not in succ_cache:
            succ_cache[t] = _core_succ(t)
        return succ_cache[t]

    for n in g.edges:
        if g.edges[n] is None:
            continue
        ts = sorted(succ(n), key=repr)
        for i, t1 in enumerate(ts):
            for t2 in ts[i + 1:]:
                if quaseq(t1, t2) or succ(t1) & succ(t2):
                    continue
                return _fail(report, {"from": show_system(n), "left": show_system(t1),
                                      "right": show_system(t2)})
    return g


def _safe_leaves(g):
    return [n for n, succ in g.edges.items()
            if succ is not None and not succ and has_violation(n) is None]


def _check_determinism(s, spec, report):
    g = _graph(s, spec)
    results = {canon(erase(t)) for t in _safe_leaves(g)}
    if len(results) > 1:
        _fail(report, {"system": show_system(s), "results": sorted(show(r) for r in results)})
    elif not results:
        report.vacuous += 1
    return g


def _check_correspondence(s, spec, report):
    g = _graph(s, spec)
    for a, b in _edges(g):
        pa, pb = canon(erase(a)), canon(erase(b))
        if pa != pb and pb not in step(pa, _DEFS):
            return _fail(report, {"from": show_system(a), "to": show_system(b)})
    return g


def _check_convergence(s, spec, report):
    try:
        res = evaluate_safe(s, _DEFS, budget=spec.state_budget * 10)
    except BudgetExhausted:
        report.truncated += 1
        return None
    if res is None:
        report.vacuous += 1
        return None
    g = _graph(s, spec)
    if find_cycle(g) is not None:
        _fail(report, {"system": show_system(s)})
    return g


def _check_process_determinism(s, spec, report):
    try:
        res = evaluate_safe(s, _DEFS, budget=spec.state_budget * 10)
    except BudgetExhausted:
        report.truncated += 1
        return None
    if res is None:
        report.vacuous += 1
        return None
    want = canon(erase(res.system))
    g = explore(erase(s), _DEFS, budget=spec.state_budget)
    for leaf in g.stable():
        if leaf != want:
            _fail(report, {"system": show_system(s), "safe": show(want), "other": show(leaf)})
            break
    return g


def _check_stability(s, spec, report):
    g = _graph(s, spec)
    for n in g.edges:
        try:
            is_safely_stable(n, _DEFS, cross_check=True)
        except AssertionError as exc:
            return _fail(report, {"system": show_system(n), "error": str(exc)})
    return g


def describe(t):
    """A formula read off a safely stable system: outputs become c |-> v and
    blocked inputs blk c; systems with restricted channels are described by any."""
    binders, leaves = parts(t)
    if binders:
        return Any_()
    atoms = []
    for leaf in leaves:
        a = leaf_atom(leaf)
        atoms.append(State(a.chan, a.args) if isinstance(a, Out) else Blk(a.chan))
    return sep(*atoms) if atoms else EMP


def _env_for(s):
    chans = sorted({p.chan for p in owned_perms(s)} | {f"c{k}" for k in range(3)})
    return PermEnv({c: {Perm(c, "!")} for c in chans})


def _halves(s):
    _, leaves = parts(s)
    k = len(leaves) // 2
    return leaves[:k], leaves[k:]


def _check_merging(s, spec, report):
    if isinstance(s, SNew):
        s = s.body
    left, right = _halves(s)
    if not left or not right:
        report.vacuous += 1
        return None
    s1, s2 = spar(*left), spar(*right)
    env = _env_for(s)
    budget = spec.state_budget * 10
    forms = []
    for part in (s1, s2):
        try:
            res = evaluate_safe(part, _DEFS, budget=budget)
        except BudgetExhausted:
            report.truncated += 1
            return None
        if res is None:
            report.vacuous += 1
            return None
        f = describe(res.system)
        if not satisfies(env, part, f, _DEFS, budget):
            report.vacuous += 1
            return None
        forms.append(f)
    phi, psi = forms
    if not (separate(s1, s2) and formulas_separate(phi, psi)):
        report.vacuous += 1
        return None
    verdict = satisfies(env, SPar(s1, s2), sep(phi, psi), _DEFS, budget)
    if not verdict:
        _fail(report, {"left": show_system(s1), "right": show_system(s2),
                       "formula": show(sep(phi, psi)), "verdict": type(verdict).__name__})
    return None


SUITES = {
    "locality": _check_locality,
    "resourcing": _check_resourcing,
    "violation": _check_violation,
    "confluence": _check_confluence,
    "confluence-core": _check_confluence_core,
    "determinism": _check_determinism,
    "correspondence": _check_correspondence,
    "convergence": _check_convergence,
    "process-determinism": _check_process_determinism,
    "stability": _check_stability,
    "merging": _check_merging,
}

ACCEPTANCE_SUITES = ("locality", "resourcing", "violation", "confluence", "determinism",
                     "correspondence")


def run_metatheory_suite(name, spec=None):
    """Run one named suite over spec.count generated systems."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    spec = spec or GenSpec()
    check = SUITES[name]
    report = SuiteReport(name, spec.seed)
    for s in generate_systems(spec):
        report.systems += 1
        try:
            g = check(s, spec, report)
        except PermCCSError as exc:
            _fail(report, {"system": show_system(s), "error": f"{type(exc).__name__}: {exc}"})
            continue
        if g is not None and getattr(g, "truncated", False):
            report.truncated += 1
        report.checked += 1
    return report


# -- proof mutations ----------------------------------------------------------------------------

MUTATION_KINDS = ("post", "pre", "cond", "env", "perm", "premise", "rule")


def _mutate_node(node, kind):
    from .syntax import And, Lit as L
    c = node.conclusion
    if kind == "post":
        return dataclasses.replace(node, conclusion=dataclasses.replace(
            c, post=sep(c.post, State("zz", [L(0)]))))
    if kind == "pre":
        return dataclasses.replace(node, conclusion=dataclasses.replace(
            c, pre=sep(c.pre, State("zz", [L(1)]))))
    if kind == "cond":
        # a stronger condition: the node or its parent must notice the change
        return dataclasses.replace(node, conclusion=dataclasses.replace(
            c, cond=And(c.cond, leq(Var("zz"), L(-7)))))
    if kind == "env":
        return dataclasses.replace(node, conclusion=dataclasses.replace(
            c, env=c.env.extend("zz", {Perm("zz", "!")})))
    if kind == "perm":
        sys = _drop_perm(c.sys)
        if sys is None:
            return None
        return dataclasses.replace(node, conclusion=dataclasses.replace(c, sys=sys))
    if kind == "premise":
        if not node.premises:
            return None
        return dataclasses.replace(node, premises=node.premises[1:])
    if kind == "rule":
        other = {0: "lSpl", 1: "lNil"}.get(len(node.premises), "lDef")
        return dataclasses.replace(node, rule=other)
    raise ValueError(kind)


def _drop_perm(s):
    """s with one permission removed from its first leaf that has any."""
    if isinstance(s, Leaf):
        if not s.perms:
            return None
        return Leaf(s.perms - {min(s.perms)}, s.proc)
    if isinstance(s, SPar):
        left = _drop_perm(s.left)
        if left is not None:
            return SPar(left, s.right)
        right = _drop_perm(s.right)
        return None if right is None else SPar(s.left, right)
    body = _drop_perm(s.body)
    return None if body is None else SNew(s.chan, body)


def _replace_at(tree, path, new):
    if path == "root":
        return new
    head, _, rest = path.partition(".")
    k, _, tail = rest.partition(".")
    child = tree.premises[int(k)]
    sub = _replace_at(child, "root" + ("." + tail if tail else ""), new)
    prem = list(tree.premises)
    prem[int(k)] = sub
    return dataclasses.replace(tree, premises=prem)


def _parent(path):
    return path.rpartition(".")[0] or None


def mutations(tree, count=10, seed=0):
    """`count` single-node mutations of tree as (path, kind, mutated tree).

    Sites and kinds are drawn from a seeded generator; mutations that do not
    apply to a node (such as dropping a premise of an axiom) are skipped.
    """
    from .proofs import iter_nodes
    rng = random.Random(seed)
    nodes = list(iter_nodes(tree))
    candidates = [(p, k) for p, _ in nodes for k in MUTATION_KINDS]
    rng.shuffle(candidates)
    node_of = dict(nodes)
    out = []
    for path, kind in candidates:
        new = _mutate_node(node_of[path], kind)
        if new is None:
            continue
        out.append((path, kind, _replace_at(tree, path, new)))
        if len(out) == count:
            break
    return out


def local_paths(path):
    """Paths at which a mutation of the node at `path` may legitimately be reported."""
    return {path, _parent(path)} - {None}
