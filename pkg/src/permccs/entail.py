"""Entailment between boolean conditions and between formulas.

Conditions are linear integer constraints.  `bool_entails` first tries to prove
an entailment outright (Fourier-Motzkin elimination over the rationals, which
is sound for the integers), then searches the bounded box [-B, B]^n for a
counterexample with interval propagation.
"""
import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import TooManyVariables
from .syntax import (Add, Leq, Lit, Not, Var, eval_bool, fv_bool)

DEFAULT_BOUND = 64
DEFAULT_MAX_VARS = 6
DNF_LIMIT = 4096


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Refuted:
    sigma: dict


@dataclass(frozen=True)
class BoundedValid:
    bound: int


# -- linear forms -------------------------------------------------------------------------

def linear(e):
    """An expression as (coefficients, constant)."""
    if isinstance(e, Lit):
        return {}, e.n
    if isinstance(e, Var):
        return {e.name: 1}, 0
    lc, lk = linear(e.left)
    rc, rk = linear(e.right)
    sign = 1 if isinstance(e, Add) else -1
    out = dict(lc)
    for v, a in rc.items():
        out[v] = out.get(v, 0) + sign * a
    return {v: a for v, a in out.items() if a}, lk + sign * rk


def _leq_constraint(b, negate):
    """sum(coef*x) + k <= 0 for a <= b, or its integer negation."""
    lc, lk = linear(b.left)
    rc, rk = linear(b.right)
    coef = dict(lc)
    for v, a in rc.items():
        coef[v] = coef.get(v, 0) - a
    coef = {v: a for v, a in coef.items() if a}
    k = lk - rk
    if negate:
        # not (l <= 0)  <=>  l >= 1  <=>  -l + 1 <= 0
        return {v: -a for v, a in coef.items()}, -k + 1
    return coef, k


def dnf(b, negate=False):
    """Disjunctive normal form as a list of constraint lists."""
    if isinstance(b, Leq):
        return [[_leq_constraint(b, negate)]]
    if isinstance(b, Not):
        return dnf(b.arg, not negate)
    left, right = dnf(b.left, negate), dnf(b.right, negate)
    if negate:
        # not (a and b) = not a or not b
        return left + right
    out = [l + r for l in left for r in right]
    if len(out) > DNF_LIMIT:
        raise TooManyVariables("condition too large to normalise")
    return out


# -- rational infeasibility -------------------------------------------------------------------

def rational_infeasible(constraints):
    """True if the constraints have no rational solution (Fourier-Motzkin)."""
    rows = [({v: Fraction(a) for v, a in c.items()}, Fraction(k)) for c, k in constraints]
    while True:
        for c, k in rows:
            if not c and k > 0:
                return True
        vars_ = sorted({v for c, _ in rows for v in c})
        if not vars_:
            return False
        # eliminate the variable producing the fewest new rows
        def cost(v):
            pos = sum(1 for c, _ in rows if c.get(v, 0) > 0)
            neg = sum(1 for c, _ in rows if c.get(v, 0) < 0)
            return pos * neg - pos - neg
        v = min(vars_, key=cost)
        pos = [(c, k) for c, k in rows if c.get(v, 0) > 0]
        neg = [(c, k) for c, k in rows if c.get(v, 0) < 0]
        rest = [(c, k) for c, k in rows if c.get(v, 0) == 0]
        new = []
        for cp, kp in pos:
            for cn, kn in neg:
                ap, an = cp[v], -cn[v]
                c = {}
                for w in set(cp) | set(cn):
                    if w == v:
                        continue
                    a = cp.get(w, 0) * an + cn.get(w, 0) * ap
                    if a:
                        c[w] = a
                new.append((c, kp * an + kn * ap))
        rows = _dedupe(rest + new)
        if len(rows) > 20000:
            return False


def _dedupe(rows):
    seen, out = set(), []
    for c, k in rows:
        key = (tuple(sorted(c.items())), k)
        if key not in seen:
            seen.add(key)
            out.append((c, k))
    return out


# -- bounded search ---------------------------------------------------------------------------

def _propagate(constraints, box):
    """Shrink variable intervals; None if some constraint becomes impossible."""
    box = dict(box)
    changed = True
    while changed:
        changed = False
        for coef, k in constraints:
            # minimum of sum over the box
            lo_sum = k
            for v, a in coef.items():
                lo, hi = box[v]
                lo_sum += a * lo if a > 0 else a * hi
            if lo_sum > 0:
                return None
            for v, a in coef.items():
                lo, hi = box[v]
                own = a * lo if a > 0 else a * hi
                slack = -(lo_sum - own)  # a*x <= slack
                if a > 0:
                    nhi = slack // a
                    if nhi < hi:
                        if nhi < lo:
                            return None
                        box[v] = (lo, nhi)
                        changed = True
                else:
                    # a*x <= slack with a < 0  <=>  x >= ceil(slack / a)
                    nlo = -(slack // (-a))
                    if nlo > lo:
                        if nlo > hi:
                            return None
                        box[v] = (nlo, hi)
                        changed = True
    return box


def bounded_model(constraints, vars_, bound):
    """An integer point in [-bound, bound]^n satisfying all constraints, or None."""
    box = {v: (-bound, bound) for v in vars_}
    stack = [box]
    while stack:
        b = _propagate(constraints, stack.pop())
        if b is None:
            continue
        wide = [v for v in sorted(b) if b[v][0] < b[v][1]]
        if not wide:
            point = {v: b[v][0] for v in b}
            if all(sum(a * point[v] for v, a in c.items()) + k <= 0 for c, k in constraints):
                return point
            continue
        v = max(wide, key=lambda w: b[w][1] - b[w][0])
        lo, hi = b[v]
        mid = (lo + hi) // 2
        left, right = dict(b), dict(b)
        left[v] = (lo, mid)
        right[v] = (mid + 1, hi)
        stack.append(right)
        stack.append(left)
    return None


def bool_entails(b1, b2, bound=DEFAULT_BOUND, max_vars=DEFAULT_MAX_VARS):
    """Does b1 entail b2 for every substitution?  Valid, Refuted(sigma) or BoundedValid."""
    vars_ = sorted(fv_bool(b1) | fv_bool(b2))
    if len(vars_) > max_vars:
        raise TooManyVariables(f"{len(vars_)} variables exceed the limit of {max_vars}")
    # b1 and not b2 must be unsatisfiable
    cases = [l + r for l in dnf(b1) for r in dnf(b2, negate=True)]
    open_cases = [c for c in cases if not rational_infeasible(c)]
    if not open_cases:
        return Valid()
    for c in open_cases:
        m = bounded_model(c, vars_, bound)
        if m is not None:
            sigma = {v: m.get(v, 0) for v in vars_}
            # independent confirmation by direct evaluation
            if eval_bool(b1, sigma) and not eval_bool(b2, sigma):
                return Refuted(sigma)
            raise AssertionError(f"bounded search produced a spurious model {sigma}")
    return BoundedValid(bound)


def bool_entails_bruteforce(b1, b2, bound):
    """Exhaustive oracle over [-bound, bound]^n; only for small n and bound."""
    vars_ = sorted(fv_bool(b1) | fv_bool(b2))
    for vals in itertools.product(range(-bound, bound + 1), repeat=len(vars_)):
        sigma = dict(zip(vars_, vals))
        if eval_bool(b1, sigma) and not eval_bool(b2, sigma):
            return sigma
    return None


def accepted(verdict, allow_bounded=False):
    return isinstance(verdict, Valid) or (allow_bounded and isinstance(verdict, BoundedValid))


# -- formulas ---------------------------------------------------------------------------------

def formula_atoms(f):
    """Multiset of non-emp atoms, with closed expressions folded."""
    from .logic import conjuncts, fold_formula
    return Counter(fold_formula(a) for a in conjuncts(f))


def formula_equiv(f, g):
    """Equality modulo associativity, commutativity and the emp unit."""
    return formula_atoms(f) == formula_atoms(g)


def formula_implies(f, g):
    """Conservative entailment: equal modulo the monoid laws, or g is `any`.

    Anything else is rejected, even if semantically valid.
    """
    from .logic import Any_
    if isinstance(g, Any_):
        return True
    return formula_equiv(f, g)


def formula_minus(f, g):
    """The atoms of f left after removing those of g, or None if g is not part of f."""
    from .logic import sep
    fa, ga = formula_atoms(f), formula_atoms(g)
    if any(fa[a] < n for a, n in ga.items()):
        return None
    rest = fa - ga
    atoms = sorted(rest.elements(), key=repr)
    return sep(*atoms)
