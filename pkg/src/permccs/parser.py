"""Concrete syntax: a tokenizer and recursive-descent parsers for processes,
systems, formulas, environments and sequents.

Proof scripts are S-expressions and live in ``proofs``; they reuse the
parsers here for the embedded objects.
"""
import re

from .errors import ArityMismatch, DuplicatePermission, ParseError, UnknownDefinition
from .syntax import (Add, And, Call, DefTable, Definition, If, In, Lit, New,
                     NIL, Not, Out, Par, Process, Sub, Var, FALSE, TRUE, eq, geq, gt,
                     implies, leq, lt, or_)

KEYWORDS = {"if", "then", "else", "new", "def", "not", "and", "or", "true", "false",
            "emp", "any", "blk", "env", "bool"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\|->|\|-|\|\||<=|>=|=>|!=|[!?.|(),\[\]/{}<>=+\-*;:])
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text, allow_reserved=False):
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            elif kind == "ident" and s.startswith("_") and not allow_reserved:
                raise ParseError(f"identifiers may not start with '_' ({s})", line, col)
            tokens.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class RawCall(Process):
    """A call as written, before formal channels are known."""
    __slots__ = ("name", "args", "renaming", "positional", "line", "col")
    _fields = ("name", "args", "renaming", "positional", "line", "col")


class Parser:
    def __init__(self, text, allow_reserved=False):
        self.toks = tokenize(text, allow_reserved)
        self.i = 0

    # -- token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text, kind=None):
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind != "eof"

    def accept(self, text):
        if self.at(text) and self.tok.kind in ("sym", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")

    def ident(self, what="identifier"):
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def done(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- expressions
    def expr(self):
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Lit(int(t.text))
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if self.accept("-"):
            u = self.tok
            if u.kind == "int":
                self.i += 1
                return Lit(-int(u.text))
            return Sub(Lit(0), self.term())
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"expected an expression, found {t.text or 'end of input'!r}")

    def expr_list(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(")")
        return out

    # -- conditions
    def boolean(self):
        b = self.b_or()
        if self.accept("=>"):
            return implies(b, self.boolean())
        return b

    def b_or(self):
        b = self.b_and()
        while self.accept("or"):
            b = or_(b, self.b_and())
        return b

    def b_and(self):
        b = self.b_not()
        while self.accept("and"):
            b = And(b, self.b_not())
        return b

    def b_not(self):
        if self.accept("not"):
            return Not(self.b_not())
        return self.b_atom()

    def b_atom(self):
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            b = self.boolean()
            self.expect(")")
            return b
        return self.comparison()

    def comparison(self):
        a = self.expr()
        ops = {"<=": leq, "<": lt, ">=": geq, ">": gt, "=": eq}
        t = self.tok
        if t.kind == "sym" and t.text in ops:
            self.i += 1
            return ops[t.text](a, self.expr())
        if self.accept("!="):
            return Not(eq(a, self.expr()))
        raise self.error(f"expected a comparison, found {t.text or 'end of input'!r}")

    # -- processes
    def process(self):
        p = self.prefix()
        if self.at("|", "sym"):
            self.i += 1
            return Par(p, self.process())
        return p

    def names(self):
        out = [self.ident("channel name")]
        while self.accept(","):
            out.append(self.ident("channel name"))
        return out

    def prefix(self):
        t = self.tok
        if self.accept("new"):
            chans = self.names()
            self.expect(".")
            body = self.prefix()
            for c in reversed(chans):
                body = New(c, body)
            return body
        if self.accept("if"):
            b = self.boolean()
            self.expect("then")
            p = self.prefix()
            self.expect("else")
            return If(b, p, self.prefix())
        if t.kind == "int" and t.text == "0":
            self.i += 1
            return NIL
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.text == "!":
                self.i += 2
                args = self.expr_list() if self.at("(") else []
                return Out(t.text, args)
            if nxt.text == "?":
                self.i += 2
                params = []
                if self.accept("("):
                    if not self.at(")"):
                        params.append(self.ident("variable"))
                        while self.accept(","):
                            params.append(self.ident("variable"))
                    self.expect(")")
                self.expect(".")
                try:
                    return In(t.text, params, self.prefix())
                except ValueError as exc:
                    raise ParseError(str(exc), t.line, t.col)
            if nxt.text == "(":
                self.i += 1
                args = self.expr_list()
                renaming, positional = (), None
                if self.accept("["):
                    pairs, pos = [], []
                    if not self.at("]"):
                        while True:
                            a = self.ident("channel name")
                            if self.accept("/"):
                                pairs.append((a, self.ident("channel name")))
                            else:
                                pos.append(a)
                            if not self.accept(","):
                                break
                    self.expect("]")
                    if pairs and pos:
                        raise self.error("mixed positional and c/d renaming entries", t)
                    renaming = tuple(pairs)
                    positional = tuple(pos) if pos else None
                return RawCall(t.text, tuple(args), renaming, positional, t.line, t.col)
        raise self.error(f"expected a process, found {t.text or 'end of input'!r}")

    def definition(self):
        self.expect("def")
        name_tok = self.tok
        name = self.ident("definition name")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.ident("parameter"))
            while self.accept(","):
                params.append(self.ident("parameter"))
        self.expect(")")
        formals = None
        if self.accept("["):
            formals = []
            if not self.at("]"):
                formals = self.names()
            self.expect("]")
        self.expect("=")
        body = self.process()
        return name, params, formals, body, name_tok

    def program(self):
        """Definitions followed by an optional main process."""
        raw = []
        main = None
        while self.tok.kind != "eof":
            if self.at("def", "kw"):
                raw.append(self.definition())
            elif main is None:
                main = self.process()
            else:
                raise self.error("only one main process is allowed")
        return raw, main


# -- call resolution -------------------------------------------------------------------------

def _raw_fn(p, formals):
    if isinstance(p, Out):
        return {p.chan}
    if isinstance(p, In):
        return _raw_fn(p.body, formals) | {p.chan}
    if isinstance(p, If):
        return _raw_fn(p.then, formals) | _raw_fn(p.else_, formals)
    if isinstance(p, Par):
        return _raw_fn(p.left, formals) | _raw_fn(p.right, formals)
    if isinstance(p, New):
        return _raw_fn(p.body, formals) - {p.chan}
    if isinstance(p, RawCall):
        if p.positional is not None:
            return set(p.positional)
        m = {old: new for new, old in p.renaming}
        return {m.get(f, f) for f in formals.get(p.name, ())}
    return set()


def _raw_calls(p):
    if isinstance(p, RawCall):
        return [p]
    if isinstance(p, (In, New)):
        return _raw_calls(p.body)
    if isinstance(p, If):
        return _raw_calls(p.then) + _raw_calls(p.else_)
    if isinstance(p, Par):
        return _raw_calls(p.left) + _raw_calls(p.right)
    return []


def _resolve(p, defs):
    if isinstance(p, RawCall):
        d = defs.get(p.name)
        if d is None:
            e = UnknownDefinition(p.name)
            e.line, e.col = p.line, p.col
            raise e
        if len(p.args) != len(d.params):
            raise ArityMismatch(f"{p.line}:{p.col}: {p.name} expects {len(d.params)} "
                                f"arguments, got {len(p.args)}")
        if p.positional is not None:
            if len(p.positional) != len(d.formals):
                raise ArityMismatch(f"{p.line}:{p.col}: {p.name} expects {len(d.formals)} "
                                    f"channels, got {len(p.positional)}")
            chans = p.positional
        else:
            m = {}
            for new, old in p.renaming:
                if old in m:
                    raise ParseError(f"channel {old} renamed twice", p.line, p.col)
                m[old] = new
            chans = tuple(m.get(f, f) for f in d.formals)
        return Call(p.name, p.args, chans)
    if isinstance(p, In):
        return In(p.chan, p.params, _resolve(p.body, defs))
    if isinstance(p, New):
        return New(p.chan, _resolve(p.body, defs))
    if isinstance(p, If):
        return If(p.cond, _resolve(p.then, defs), _resolve(p.else_, defs))
    if isinstance(p, Par):
        return Par(_resolve(p.left, defs), _resolve(p.right, defs))
    return p


def build_defs(raw, base=None):
    """Turn parsed definitions into a DefTable, computing formal channels.

    Formal channels default to the free channels of the body, computed as a
    fixpoint through calls, in sorted order.
    """
    base = base or DefTable()
    seen = set()
    for name, _, _, _, tok in raw:
        if name in seen:
            raise ParseError(f"definition {name} given twice", tok.line, tok.col)
        seen.add(name)
    formals = {n: d.formals for n, d in base.items()}
    explicit = {}
    for name, params, fs, body, tok in raw:
        if fs is not None:
            explicit[name] = tuple(fs)
            formals[name] = tuple(fs)
        else:
            formals[name] = ()
    for name, params, fs, body, tok in raw:
        for c in _raw_calls(body):
            if c.name not in formals:
                e = UnknownDefinition(c.name)
                e.line, e.col = c.line, c.col
                raise e
    changed = True
    while changed:
        changed = False
        for name, params, fs, body, tok in raw:
            if name in explicit:
                continue
            new = tuple(sorted(_raw_fn(body, formals)))
            if new != formals[name]:
                formals[name] = new
                changed = True
    defs = DefTable(base)
    for name, params, fs, body, tok in raw:
        defs[name] = Definition(params, formals[name], NIL)
    from .syntax import fn, fv
    for name, params, fs, body, tok in raw:
        resolved = _resolve(body, defs)
        d = defs[name]
        if name in explicit:
            extra = fn(resolved) - set(d.formals)
            if extra:
                raise ParseError(f"{name} uses channels {sorted(extra)} missing from its "
                                 f"formal list", tok.line, tok.col)
        loose = fv(resolved) - set(params)
        if loose:
            raise ParseError(f"{name} has free variables {sorted(loose)}", tok.line, tok.col)
        d.body = resolved
    return defs


# -- entry points -------------------------------------------------------------------------------

def parse_process(text, defs=None, allow_reserved=False):
    """Parse definitions plus an optional main process; returns (DefTable, Process)."""
    p = Parser(text, allow_reserved)
    raw, main = p.program()
    table = build_defs(raw, defs)
    proc = _resolve(main, table) if main is not None else None
    return table, proc


def parse_expr(text):
    p = Parser(text)
    e = p.expr()
    p.done()
    return e


def parse_bool(text):
    p = Parser(text)
    b = p.boolean()
    p.done()
    return b


def _sys_parser(cls_parser):
    from .systems import Leaf, Perm, SNew, SPar

    class SysParser(cls_parser):
        def perm(self):
            t = self.tok
            c = self.ident("channel name")
            if self.accept("?"):
                return Perm(c, "?")
            if self.accept("!"):
                return Perm(c, "!")
            raise self.error("expected '?' or '!' after a permission channel", t)

        def perm_set(self, close):
            perms = []
            if not self.at(close):
                while True:
                    t = self.tok
                    q = self.perm()
                    if q in perms:
                        raise DuplicatePermission(f"duplicate permission {q}", t.line, t.col)
                    perms.append(q)
                    if not self.accept(","):
                        break
            self.expect(close)
            return frozenset(perms)

        def system(self):
            s = self.sys_prefix()
            if self.at("||") or self.at("|", "sym"):
                self.i += 1
                right = self.system()
                try:
                    return SPar(s, right)
                except Exception as exc:
                    raise self.error(str(exc))
            return s

        def sys_prefix(self):
            if self.accept("new"):
                chans = self.names()
                self.expect(".")
                body = self.sys_prefix()
                for c in reversed(chans):
                    body = SNew(c, body)
                return body
            if self.accept("<"):
                perms = self.perm_set(">")
                self.expect("{")
                body = self.process()
                self.expect("}")
                return Leaf(perms, body)
            if self.accept("("):
                s = self.system()
                self.expect(")")
                return s
            raise self.error(f"expected a system, found {self.tok.text or 'end of input'!r}")

    return SysParser


def _resolve_sys(s, defs):
    from .systems import Leaf, SNew, SPar
    if isinstance(s, Leaf):
        return Leaf(s.perms, _resolve(s.proc, defs))
    if isinstance(s, SPar):
        return SPar(_resolve_sys(s.left, defs), _resolve_sys(s.right, defs))
    return SNew(s.chan, _resolve_sys(s.body, defs))


def parse_system_file(text, defs=None, allow_reserved=False):
    """Definitions followed by one system; returns (DefTable, System)."""
    p = _sys_parser(Parser)(text, allow_reserved)
    raw = []
    while p.at("def", "kw"):
        raw.append(p.definition())
    table = build_defs(raw, defs)
    if p.tok.kind == "eof":
        raise p.error("expected a system")
    s = p.system()
    p.done()
    return table, _resolve_sys(s, table)


def parse_system(text, defs=None, allow_reserved=False):
    return parse_system_file(text, defs, allow_reserved)[1]


def _logic_parser(base):
    from .logic import Any_, Blk, Emp, PermEnv, Sep, State

    class LogicParser(base):
        def formula(self):
            f = self.f_atom()
            if self.accept("*"):
                return Sep(f, self.formula())
            return f

        def f_atom(self):
            if self.accept("emp"):
                return Emp()
            if self.accept("any"):
                return Any_()
            if self.accept("blk"):
                return Blk(self.ident("channel name"))
            if self.accept("("):
                f = self.formula()
                self.expect(")")
                return f
            if self.tok.kind == "ident" and self.peek().text == "|->":
                c = self.ident()
                self.i += 1
                if self.at("("):
                    args = self.expr_list()
                else:
                    args = [self.expr()]
                return State(c, args)
            raise self.error(f"expected a formula, found {self.tok.text or 'end of input'!r}")

        def env(self, stop=None):
            entries = {}
            if self.accept("{") and self.accept("}"):
                return PermEnv(entries)
            while self.tok.kind == "ident":
                t = self.tok
                c = self.ident()
                self.expect(":")
                self.expect("{")
                perms = self.perm_set("}")
                if c in entries:
                    raise ParseError(f"channel {c} mapped twice", t.line, t.col)
                entries[c] = perms
                if not self.accept(";"):
                    break
            return PermEnv(entries)

    return LogicParser


def parse_formula(text):
    p = _logic_parser(_sys_parser(Parser))(text)
    f = p.formula()
    p.done()
    return f


def parse_env(text):
    from .logic import PermEnv
    p = _logic_parser(_sys_parser(Parser))(text)
    if p.tok.kind == "eof":
        return PermEnv({})
    g = p.env()
    p.done()
    return g


def parse_sequent(text, defs=None, allow_reserved=False):
    from .proofs import Sequent
    p = _logic_parser(_sys_parser(Parser))(text, allow_reserved)
    p.expect("env")
    g = p.env()
    p.accept(";")
    p.expect("bool")
    b = p.boolean()
    p.expect("|-")
    p.expect("{")
    pre = p.formula()
    p.expect("}")
    s = p.system()
    p.expect("{")
    post = p.formula()
    p.expect("}")
    p.done()
    return Sequent(g, b, pre, _resolve_sys(s, defs or DefTable()), post)
