import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from permccs.syntax import Add, And, Leq, Lit, Not, Sub, Var

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

VARS = ("x", "y", "z")
small_ints = st.integers(-20, 20)


def exprs(vars_=VARS, max_leaves=6):
    leaf = st.one_of(small_ints.map(Lit), st.sampled_from(vars_).map(Var))
    return st.recursive(leaf, lambda e: st.one_of(st.builds(Add, e, e), st.builds(Sub, e, e)),
                        max_leaves=max_leaves)


def closed_exprs():
    return st.recursive(small_ints.map(Lit),
                        lambda e: st.one_of(st.builds(Add, e, e), st.builds(Sub, e, e)),
                        max_leaves=6)


def bools(e=None):
    e = exprs() if e is None else e
    leaf = st.builds(Leq, e, e)
    return st.recursive(leaf, lambda b: st.one_of(st.builds(Not, b), st.builds(And, b, b)),
                        max_leaves=4)


CHANS = ("c", "d", "e")


def processes(max_leaves=8, closed=False):
    """Random processes; with closed=True every expression and condition is closed."""
    from permccs.syntax import If, In, NIL, New, Out, Par

    e = closed_exprs() if closed else exprs()
    cond = bools(closed_exprs()) if closed else bools(exprs(max_leaves=2))
    args = st.lists(e, max_size=2).map(tuple)
    leaf = st.one_of(st.just(NIL), st.builds(Out, st.sampled_from(CHANS), args))

    def grow(p):
        return st.one_of(
            st.builds(In, st.sampled_from(CHANS), st.sampled_from([(), ("x",), ("x", "y")]), p),
            st.builds(If, cond, p, p),
            st.builds(Par, p, p),
            st.builds(New, st.sampled_from(CHANS), p),
        )

    return st.recursive(leaf, grow, max_leaves=max_leaves)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = mod.report_lines() if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
