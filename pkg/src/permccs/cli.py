"""permccs command line: run, certify, satisfy, prove, oracle."""
import argparse
import json
import os
import signal
import sys
from dataclasses import dataclass

from .corpus import data_path
from .entail import DEFAULT_BOUND
from .errors import BudgetExhausted, ParseError, PermCCSError
from .logic import Sat, Unknown as SatUnknown, satisfies, show_env, show_formula
from .parser import parse_env, parse_formula, parse_process, parse_system_file
from .printer import show, show_perms
from .process import DEFAULT_BUDGET, canon, explore, key
from .proofs import check_proof, load_script_file, sequent_holds_semantically, show_sequent
from .systems import (DEFAULT_SPLIT_CAP, deepest_violation, erase, evaluate_safe, owned_perms,
                      parts, show_system)
from .syntax import Call, Par

OK, FAILED, PARSE, BUDGET, NO_NARRATIVE, NONDET, REJECTED = 0, 1, 2, 3, 4, 10, 11


@dataclass(frozen=True)
class Config:
    budget: int = DEFAULT_BUDGET
    split_cap: int = DEFAULT_SPLIT_CAP
    domain_bound: int = DEFAULT_BOUND
    seed: int = 0
    output: str = "text"
    trace: bool = False

    def __post_init__(self):
        for name in ("budget", "split_cap", "domain_bound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class _Out:
    """Collects text lines or one JSON document and writes them at the end."""

    def __init__(self, cfg, stream):
        self.cfg, self.stream = cfg, stream
        self.doc = {}

    def line(self, text=""):
        if self.cfg.output == "text":
            print(text, file=self.stream)

    def put(self, **kw):
        self.doc.update(kw)

    def flush(self, code):
        if self.cfg.output == "json":
            self.doc["exit"] = code
            self.stream.write(json.dumps(self.doc, sort_keys=True, indent=2) + "\n")
        return code


def _resolve(name):
    if os.path.exists(name):
        return name
    if os.path.exists(data_path(name)):
        return data_path(name)
    raise FileNotFoundError(f"no such file: {name}")


def _read(name):
    with open(_resolve(name)) as fh:
        return fh.read()


def _path_to(edges, root, target):
    parent = {root: None}
    frontier = [root]
    while frontier and target not in parent:
        nxt = []
        for n in frontier:
            for s in edges.get(n) or ():
                if s not in parent:
                    parent[s] = n
                    nxt.append(s)
        frontier = nxt
    path = []
    node = target
    while node is not None:
        path.append(node)
        node = parent.get(node)
    return path[::-1]


def cmd_run(args, cfg, out):
    defs, proc = parse_process(_read(args.file))
    if proc is None:
        # a file of definitions only runs its first parameterless definition
        name = next((n for n, d in defs.items() if not d.params), None)
        proc = Call(name, (), defs[name].formals) if name else None
    if args.context:
        _, ctx = parse_process(args.context, defs)
        proc = Par(proc, ctx) if proc is not None else ctx
    if proc is None:
        raise ParseError("no main process to run")
    g = explore(proc, defs, cfg.budget)
    leaves = sorted(g.stable(), key=key)
    shown = sorted(show(q, defs) for q in leaves)
    out.put(command="run", results=shown, states=len(g.edges), truncated=g.truncated)
    for s in shown:
        out.line(s)
    if cfg.trace:
        traces = {}
        for q in leaves:
            steps = [show(n, defs) for n in _path_to(g.edges, g.root, q)]
            traces[show(q, defs)] = steps
            out.line(f"-- trace to {show(q, defs)}")
            for k, st in enumerate(steps):
                out.line(f"  {k}: {st}")
        out.put(traces=traces)
    if g.truncated:
        out.line(f"budget of {cfg.budget} states exhausted; results are partial")
        return BUDGET
    if len(leaves) >= 2:
        out.line(f"nondeterministic: {len(leaves)} stable results")
        return NONDET
    return OK


def _snapshot(system, defs):
    _, leaves = parts(system)
    return {"system": show_system(system, defs),
            "perms": [show_perms(leaf.perms) for leaf in leaves]}


def cmd_certify(args, cfg, out):
    defs, system = parse_system_file(_read(args.file))
    out.put(command="certify")
    try:
        res = evaluate_safe(system, defs, cfg.budget, cfg.split_cap)
    except BudgetExhausted as exc:
        out.put(status="budget")
        out.line(str(exc))
        return BUDGET
    if res is None:
        bad = deepest_violation(system, defs, cfg.budget, cfg.split_cap)
        witness = show_system(bad, defs) if bad is not None else show_system(system, defs)
        out.put(status="no-narrative", violation=witness)
        out.line("no safe evaluation exists")
        out.line(f"violation: {witness}")
        return NO_NARRATIVE
    result = show(canon(erase(res.system)), defs)
    trace = [dict(rule=st.rule, path=list(st.path), **_snapshot(st.system, defs))
             for st in res.trace]
    out.put(status="certified", result=result, final=show_system(res.system, defs),
            trace=trace, owned=show_perms(owned_perms(res.system)))
    out.line(f"result: {result}")
    out.line(f"final: {show_system(res.system, defs)}")
    out.line(f"trace ({len(trace)} steps):")
    for k, st in enumerate(trace):
        out.line(f"  {k}: {st['rule']} {st['system']}")
    return OK


def cmd_satisfy(args, cfg, out):
    defs, system = parse_system_file(_read(args.system))
    f = parse_formula(_read(args.formula))
    env = parse_env(_read(args.env))
    v = satisfies(env, system, f, defs, cfg.budget, cfg.split_cap)
    verdict = type(v).__name__
    out.put(command="satisfy", verdict=verdict, formula=show_formula(f), env=show_env(env))
    out.line(verdict)
    if isinstance(v, Sat):
        out.put(witness=show_system(v.system, defs))
        out.line(f"witness: {show_system(v.system, defs)}")
        if cfg.trace:
            out.put(trace=[_snapshot(st.system, defs) for st in v.trace])
            for st in v.trace:
                out.line(f"  {st.rule} {show_system(st.system, defs)}")
        return OK
    out.put(reason=v.reason, detail=getattr(v, "detail", ""))
    out.line(f"reason: {v.reason}")
    if getattr(v, "detail", ""):
        out.line(f"detail: {v.detail}")
    return BUDGET if isinstance(v, SatUnknown) else FAILED


def cmd_prove(args, cfg, out):
    defs, tree = load_script_file(_resolve(args.file))
    res = check_proof(tree, defs, bound=cfg.domain_bound)
    out.put(command="prove", accepted=res.ok, sequent=show_sequent(res.sequent, defs),
            errors=[dict(path=e.path, rule=e.rule, kind=e.kind, reason=e.reason)
                    for e in res.errors])
    if not res.ok:
        out.line("rejected")
        for e in res.errors:
            out.line(f"  {e}")
        return REJECTED
    out.line("accepted")
    out.line(show_sequent(res.sequent, defs))
    if args.semantic:
        sem = sequent_holds_semantically(res.sequent, defs, budget=cfg.budget)
        out.put(semantic=sem.status, points=sem.points, contexts=sem.contexts)
        out.line(f"semantic check: {sem.status} ({sem.points} points, {sem.contexts} contexts)")
    return OK


def cmd_oracle(args, cfg, out):
    from .oracles import ACCEPTANCE_SUITES, SUITES, GenSpec, run_metatheory_suite
    if args.suite == "all":
        names = list(SUITES)
    elif args.suite == "acceptance":
        names = list(ACCEPTANCE_SUITES)
    else:
        names = [args.suite]
    spec = GenSpec(seed=cfg.seed, count=args.count)
    reports = [run_metatheory_suite(n, spec) for n in names]
    out.put(command="oracle", suites=[r.to_dict() for r in reports])
    for r in reports:
        status = "pass" if r.ok else "FAIL"
        out.line(f"{r.suite}: {status} ({r.checked} checked, {r.vacuous} vacuous, "
                 f"{r.truncated} truncated, {r.failures} failures)")
        if not r.ok:
            out.line(f"  counterexample: {r.first_counterexample}")
    return OK if all(r.ok for r in reports) else FAILED


def _common(suppress=False):
    # flags are accepted before and after the subcommand; only the top level sets defaults
    env_budget = os.environ.get("PERMCCS_BUDGET")

    def d(v):
        return argparse.SUPPRESS if suppress else v

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--budget", type=int,
                   default=d(int(env_budget) if env_budget else DEFAULT_BUDGET),
                   help="state budget (default from PERMCCS_BUDGET)")
    p.add_argument("--split-cap", type=int, default=d(DEFAULT_SPLIT_CAP))
    p.add_argument("--bound", type=int, default=d(DEFAULT_BOUND),
                   help="integer domain bound for entailment checks")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--json", action="store_true", default=d(False))
    p.add_argument("--trace", action="store_true", default=d(False))
    return p


def build_parser():
    from .oracles import SUITES
    common = _common(suppress=True)
    ap = argparse.ArgumentParser(prog="permccs", parents=[_common()],
                                 description="Permission-confined CCS toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="evaluate a process")
    r.add_argument("file")
    r.add_argument("--with", dest="context", help="process to run in parallel")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("certify", parents=[common], help="find a safe evaluation")
    c.add_argument("file")
    c.set_defaults(func=cmd_certify)
    s = sub.add_parser("satisfy", parents=[common], help="decide env, S |= formula")
    s.add_argument("system")
    s.add_argument("formula")
    s.add_argument("env")
    s.set_defaults(func=cmd_satisfy)
    pr = sub.add_parser("prove", parents=[common], help="check a proof script")
    pr.add_argument("file")
    pr.add_argument("--semantic", action="store_true",
                    help="also test the root sequent on sample points")
    pr.set_defaults(func=cmd_prove)
    o = sub.add_parser("oracle", parents=[common], help="run a metatheory suite")
    o.add_argument("suite", choices=sorted(SUITES) + ["acceptance", "all"])
    o.add_argument("--count", type=int, default=500)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    signal.signal(signal.SIGPIPE, signal.SIG_DFL) if stream is sys.stdout else None
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args.budget, args.split_cap, args.bound, args.seed,
                     "json" if args.json else "text", args.trace)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PARSE
    out = _Out(cfg, stream)
    try:
        code = args.func(args, cfg, out)
    except (ParseError, FileNotFoundError) as exc:
        out.put(error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        code = PARSE
    except BudgetExhausted as exc:
        out.put(error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        code = BUDGET
    except PermCCSError as exc:
        out.put(error=f"{type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = FAILED
    return out.flush(code)


if __name__ == "__main__":
    sys.exit(main())
