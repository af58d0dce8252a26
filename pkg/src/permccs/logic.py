"""Permission environments, assertion formulas and their satisfaction by systems."""
import itertools
from dataclasses import dataclass, field

from .errors import BudgetExhausted, EnvInvariantViolation, NotWellResourced, OpenFormula
from .process import DEFAULT_BUDGET
from .syntax import Node, eval_expr, fold_expr, fv_expr, lit, subst_expr
from .systems import (DEFAULT_SPLIT_CAP, Leaf, Perm, evaluate_safe, leaf_atom, names,
                      parts, perm_set, safe_terminals, sfv, well_resourced)
from .printer import show_perms
from .syntax import In, Out


# -- environments ------------------------------------------------------------------------

def env_violations(mapping):
    """Human-readable reasons why a channel-to-permissions map is not an environment."""
    out = []
    dom = set(mapping)
    for c in sorted(mapping):
        perms = mapping[c]
        if Perm(c, "?") in perms:
            out.append(f"{c}? must not guard {c}")
        if Perm(c, "!") not in perms:
            out.append(f"{c}! must guard {c}")
        stray = names(perms) - dom
        if stray:
            out.append(f"the entry for {c} mentions {', '.join(sorted(stray))} outside the domain")
    return out


class PermEnv:
    """Finite map from channels to the permission sets an output on them must hold."""
    __slots__ = ("_map", "_h")

    def __init__(self, mapping=None, check=True):
        m = {c: perm_set(v) for c, v in (mapping or {}).items()}
        if check:
            bad = env_violations(m)
            if bad:
                raise EnvInvariantViolation("; ".join(bad))
        object.__setattr__(self, "_map", m)
        object.__setattr__(self, "_h", hash(frozenset(m.items())))

    def __setattr__(self, name, value):
        raise AttributeError("environments are immutable")

    def __getitem__(self, c):
        return self._map[c]

    def get(self, c, default=frozenset()):
        return self._map.get(c, default)

    def __contains__(self, c):
        return c in self._map

    def __iter__(self):
        return iter(sorted(self._map))

    def __len__(self):
        return len(self._map)

    def items(self):
        return sorted(self._map.items())

    @property
    def dom(self):
        return frozenset(self._map)

    def names(self):
        out = set(self._map)
        for v in self._map.values():
            out |= names(v)
        return out

    def extend(self, c, perms):
        m = dict(self._map)
        m[c] = perm_set(perms)
        return PermEnv(m)

    def __eq__(self, other):
        return isinstance(other, PermEnv) and self._map == other._map

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"PermEnv({show_env(self)})"

    def __str__(self):
        return show_env(self)


def env_wellformed(env):
    m = env._map if isinstance(env, PermEnv) else {c: perm_set(v) for c, v in env.items()}
    return not env_violations(m)


def env_restrict(env, chans):
    """Drop the entries of the given channels and forget their permissions."""
    if isinstance(chans, str):
        chans = [chans]
    chans = set(chans)
    m = {}
    for c, perms in env.items():
        if c not in chans:
            m[c] = frozenset(q for q in perms if q.chan not in chans)
    return PermEnv(m)


def env_rename(env, new, old):
    """Rename a channel in both the domain and the permission sets."""
    def r(c):
        return new if c == old else c
    return PermEnv({r(c): frozenset(Perm(r(q.chan), q.pol) for q in v) for c, v in env.items()})


def show_env(env):
    if not len(env):
        return "{}"
    return "; ".join(f"{c} : {{{show_perms(v)}}}" for c, v in env.items())


# -- formulas ------------------------------------------------------------------------------

class Formula(Node):
    __slots__ = ()


class Emp(Formula):
    __slots__ = ()
    _fields = ()


class Any_(Formula):
    __slots__ = ()
    _fields = ()


class State(Formula):
    __slots__ = ("chan", "args")
    _fields = ("chan", "args")

    def __init__(self, chan, args=()):
        super().__init__(chan, tuple(lit(e) for e in args))


class Blk(Formula):
    __slots__ = ("chan",)
    _fields = ("chan",)


class Sep(Formula):
    __slots__ = ("left", "right")
    _fields = ("left", "right")


EMP = Emp()
ANY = Any_()


def sep(*fs):
    """Right-nested separating conjunction; emp for no arguments."""
    if not fs:
        return EMP
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Sep(f, out)
    return out


def conjuncts(f):
    """The non-emp atoms of a formula, left to right."""
    if isinstance(f, Sep):
        return conjuncts(f.left) + conjuncts(f.right)
    if isinstance(f, Emp):
        return []
    return [f]


def is_state_formula(f):
    if isinstance(f, Sep):
        return is_state_formula(f.left) and is_state_formula(f.right)
    return isinstance(f, (Emp, State))


def fv_formula(f):
    if isinstance(f, State):
        out = set()
        for e in f.args:
            out |= fv_expr(e)
        return out
    if isinstance(f, Sep):
        return fv_formula(f.left) | fv_formula(f.right)
    return set()


def fn_formula(f):
    if isinstance(f, (State, Blk)):
        return {f.chan}
    if isinstance(f, Sep):
        return fn_formula(f.left) | fn_formula(f.right)
    return set()


def subst_formula(f, sigma):
    if isinstance(f, State):
        return State(f.chan, [subst_expr(e, sigma) for e in f.args])
    if isinstance(f, Sep):
        return Sep(subst_formula(f.left, sigma), subst_formula(f.right, sigma))
    return f


def fold_formula(f):
    if isinstance(f, State):
        return State(f.chan, [fold_expr(e) for e in f.args])
    if isinstance(f, Sep):
        return Sep(fold_formula(f.left), fold_formula(f.right))
    return f


def rename_formula(f, new, old):
    if isinstance(f, State) and f.chan == old:
        return State(new, f.args)
    if isinstance(f, Blk) and f.chan == old:
        return Blk(new)
    if isinstance(f, Sep):
        return Sep(rename_formula(f.left, new, old), rename_formula(f.right, new, old))
    return f


def edges(f):
    """Output permissions a system satisfying f may offer; None if unknown."""
    if isinstance(f, (Emp, Blk)):
        return frozenset()
    if isinstance(f, State):
        return frozenset({Perm(f.chan, "!")})
    if isinstance(f, Sep):
        a, b = edges(f.left), edges(f.right)
        return None if a is None or b is None else a | b
    return None


def triggers(f):
    """Output permissions that would unblock a system satisfying f; None if unknown."""
    if isinstance(f, (Emp, State)):
        return frozenset()
    if isinstance(f, Blk):
        return frozenset({Perm(f.chan, "!")})
    if isinstance(f, Sep):
        a, b = triggers(f.left), triggers(f.right)
        return None if a is None or b is None else a | b
    return None


def _disjoint(a, b):
    # an empty side is disjoint from anything, even an unknown one
    if a == frozenset() or b == frozenset():
        return True
    return a is not None and b is not None and not (a & b)


def formulas_separate(f, g):
    return _disjoint(edges(f), triggers(g)) and _disjoint(edges(g), triggers(f))


def formula_restrict(f, chans):
    """Weaken assertions on scoped channels to `any`."""
    if isinstance(chans, str):
        chans = [chans]
    chans = set(chans)
    if isinstance(f, (State, Blk)):
        return f if f.chan not in chans else ANY
    if isinstance(f, Emp):
        return f
    if isinstance(f, Sep):
        return Sep(formula_restrict(f.left, chans), formula_restrict(f.right, chans))
    return ANY


def show_formula(f, prec=0):
    from .printer import show_args, show_expr
    if isinstance(f, Emp):
        return "emp"
    if isinstance(f, Any_):
        return "any"
    if isinstance(f, Blk):
        return f"blk {f.chan}"
    if isinstance(f, State):
        if len(f.args) == 1:
            return f"{f.chan} |-> {show_expr(f.args[0], 2)}"
        return f"{f.chan} |-> {show_args(f.args)}"
    s = f"{show_formula(f.left, 1)} * {show_formula(f.right, 0)}"
    return f"({s})" if prec else s


# -- satisfaction ----------------------------------------------------------------------------

@dataclass
class Sat:
    """Witness: a safe evaluation, its final system, and how the atoms of the
    formula map onto the leaves of that system."""
    system: object
    trace: list = field(default_factory=list)
    assignment: list = field(default_factory=list)

    def __bool__(self):
        return True


@dataclass
class Unsat:
    reason: str
    detail: str = ""

    def __bool__(self):
        return False


@dataclass
class Unknown:
    reason: str

    def __bool__(self):
        return False


MISSING_PERMISSION = "missing permission"
ENV_OBLIGATION = "env obligation"
DATA_MISMATCH = "data mismatch"
SHAPE = "shape mismatch"


class _Matcher:
    """Checks a formula against a safely stable system given as binders and leaves.

    The relax flags drop individual side conditions; they are only used to
    classify why a formula fails.
    """

    def __init__(self, env, binders, leaves, relax_env=False, relax_data=False):
        self.env = env
        self.binders = set(binders)
        self.leaves = leaves
        self.relax_env = relax_env
        self.relax_data = relax_data
        self.memo = {}

    def atom(self, i, f):
        leaf = self.leaves[i]
        a = leaf_atom(leaf)
        if isinstance(f, State):
            if not isinstance(a, Out) or a.chan != f.chan or f.chan in self.binders:
                return False
            if not self.relax_data:
                if len(a.args) != len(f.args):
                    return False
                if [eval_expr(e) for e in a.args] != [eval_expr(e) for e in f.args]:
                    return False
            return self.relax_env or self.env.get(f.chan) <= leaf.perms
        if isinstance(f, Blk):
            if not isinstance(a, In) or a.chan != f.chan or f.chan in self.binders:
                return False
            return self.relax_env or f.chan in self.env
        return False

    def match(self, idx, f):
        """An assignment of the leaves idx to the atoms of f, or None."""
        k = (idx, f)
        if k in self.memo:
            return self.memo[k]
        r = self._match(idx, f)
        self.memo[k] = r
        return r

    def _match(self, idx, f):
        if isinstance(f, Any_):
            return []
        if isinstance(f, Emp):
            return [] if not idx else None
        if isinstance(f, (State, Blk)):
            if len(idx) == 1 and self.atom(idx[0], f):
                return [(f, idx[0])]
            return None
        # no binder may be in the environment's domain; canonical binder names never are
        if self.binders & self.env.dom:
            return None
        for r in range(len(idx) + 1):
            for left in itertools.combinations(idx, r):
                right = tuple(i for i in idx if i not in left)
                a = self.match(left, f.left)
                if a is None:
                    continue
                b = self.match(right, f.right)
                if b is not None:
                    return a + b
        return None


def match_stable(env, system, f, relax_env=False, relax_data=False):
    """Leaf assignment if the safely stable `system` satisfies f directly."""
    binders, leaves = parts(system)
    m = _Matcher(env, binders, leaves, relax_env, relax_data)
    return m.match(tuple(range(len(leaves))), f)


def _check_inputs(env, s, f):
    if fv_formula(f):
        raise OpenFormula(f"formula has free variables {sorted(fv_formula(f))}")
    if sfv(s):
        from .errors import StuckOnOpenTerm
        raise StuckOnOpenTerm(f"system has free variables {sorted(sfv(s))}")
    if not well_resourced(s):
        raise NotWellResourced("system is not well resourced")
    if not isinstance(env, PermEnv):
        env = PermEnv(env)
    elif not env_wellformed(env):
        raise EnvInvariantViolation("; ".join(env_violations(env._map)))
    return env


def satisfies(env, s, f, defs, budget=DEFAULT_BUDGET, split_cap=DEFAULT_SPLIT_CAP):
    """Decide env, s |= f.  Returns Sat, Unsat or Unknown (budget exhausted)."""
    env = _check_inputs(env, s, f)

    def goal(t):
        return match_stable(env, t, f) is not None

    try:
        res = evaluate_safe(s, defs, budget, split_cap, goal=goal)
    except BudgetExhausted as exc:
        return Unknown(str(exc))
    if res is not None:
        return Sat(res.system, res.trace, match_stable(env, res.system, f))
    return _classify(env, s, f, defs, budget, split_cap)


def _classify(env, s, f, defs, budget, split_cap):
    try:
        terms, complete = safe_terminals(s, defs, budget, split_cap)
    except BudgetExhausted as exc:
        return Unknown(str(exc))
    if not terms:
        if not complete:
            return Unknown("budget exhausted before any safe evaluation was found")
        return Unsat(MISSING_PERMISSION, "no safe evaluation exists")
    for t in terms:
        if match_stable(env, t, f, relax_env=True) is not None:
            return Unsat(ENV_OBLIGATION, f"{t} lacks permissions the environment requires")
    for t in terms:
        if match_stable(env, t, f, relax_env=True, relax_data=True) is not None:
            return Unsat(DATA_MISMATCH, f"{t} carries different values")
    return Unsat(SHAPE, "no safe evaluation has the asserted shape")


# -- brute-force semantic implication (test oracle) ----------------------------------------

def candidate_systems(chans, values, max_atoms, arity=1):
    """Closed well-resourced systems of at most max_atoms leaves, each leaf a single
    output or a blocked input, with every permission assignment from a disjoint pool."""
    from .syntax import NIL, Lit
    from .systems import spar
    atoms = []
    for c in chans:
        for vs in itertools.product(values, repeat=arity):
            atoms.append(Out(c, [Lit(v) for v in vs]))
        atoms.append(In(c, [f"x{k}" for k in range(arity)], NIL))
    pool = sorted({Perm(c, p) for c in chans for p in "?!"})
    for n in range(0, max_atoms + 1):
        for combo in itertools.combinations_with_replacement(range(len(atoms)), n):
            procs = [atoms[i] for i in combo]
            for owners in itertools.product(range(n + 1), repeat=len(pool)):
                perms = [set() for _ in range(n)]
                for q, o in zip(pool, owners):
                    if o < n:
                        perms[o].add(q)
                if n == 0:
                    yield Leaf(frozenset(), NIL)
                    break
                yield spar(*[Leaf(frozenset(e), p) for e, p in zip(perms, procs)])


def candidate_envs(chans):
    """Every well-formed environment over subsets of chans."""
    chans = sorted(chans)
    for r in range(len(chans) + 1):
        for dom in itertools.combinations(chans, r):
            extras = [[Perm(d, "!") for d in dom if d != c] + [Perm(d, "?") for d in dom if d != c]
                      for c in dom]
            for choice in itertools.product(*[range(1 << len(x)) for x in extras]):
                m = {}
                for c, xs, mask in zip(dom, extras, choice):
                    m[c] = {Perm(c, "!")} | {q for k, q in enumerate(xs) if mask >> k & 1}
                yield PermEnv(m)


@dataclass
class BruteForceResult:
    valid: bool
    checked: int
    counterexample: tuple = None


def semantic_implies_bruteforce(f, g, defs=None, chans=None, values=(1, 2), max_atoms=2,
                                env_limit=None):
    """Search all small (env, system) pairs for one satisfying f but not g."""
    from .syntax import DefTable
    defs = defs if defs is not None else DefTable()
    chans = sorted(chans or (fn_formula(f) | fn_formula(g)) or {"c"})
    arities = [len(x.args) for x in conjuncts(f) + conjuncts(g) if isinstance(x, State)]
    arity = arities[0] if arities else 1
    envs = list(candidate_envs(chans))
    if env_limit is not None:
        envs = envs[:env_limit]
    checked = 0
    systems = list(candidate_systems(chans, values, max_atoms, arity))
    for env in envs:
        for s in systems:
            checked += 1
            if satisfies(env, s, f, defs) and not satisfies(env, s, g, defs):
                return BruteForceResult(False, checked, (env, s))
    return BruteForceResult(True, checked)
