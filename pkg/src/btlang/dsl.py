"""Surface syntax for behavior programs (``.bhv`` files).

A program is a list of definitions.  A definition starts with a name in the
first column; continuation lines must be indented::

    -- comments start with -- or #
    openPassClose(door) = open(door) ; passThrough(door) ; close(door)
    enterRoom = doors <- findDoors ; fallbackOver(doors, tryDoor)
    bt = monitor(cmp(<, 10, batteryLevel), recharge, enterRoom ; doTask)

Operators, loosest first: ``?`` (fallback, right associative), ``|||``
(parallel, right associative), ``;`` (sequence, left associative; a
``x <- e ;`` binding scopes over the rest of its chain).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Span:
    file: str = "<input>"
    line: int = 1
    col: int = 1
    end_col: int = 1

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


class DslError(Exception):
    """Syntax, resolution or type error, reported as ``file:line:col: message``."""

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span or Span()
        super().__init__(f"{self.span}: {message}")


def _span():
    return field(default=None, compare=False, repr=False)


# -- AST -----------------------------------------------------------------------

@dataclass
class Call:
    name: str
    args: tuple
    span: Span = _span()


@dataclass
class VarRef:
    name: str
    span: Span = _span()


@dataclass
class Lit:
    value: Any  # int or bool
    span: Span = _span()


@dataclass
class Pure:
    value: Any = None  # None or a Lit
    span: Span = _span()


@dataclass
class Seq:
    first: Any
    second: Any
    span: Span = _span()


@dataclass
class Bind:
    var: str
    first: Any
    body: Any
    span: Span = _span()


@dataclass
class Fallback:
    first: Any
    second: Any
    span: Span = _span()


@dataclass
class Parallel:
    left: Any
    right: Any
    span: Span = _span()


@dataclass
class Both:
    left: Any
    right: Any
    span: Span = _span()


@dataclass
class RSelect:
    test: Any
    left: Any
    right: Any
    span: Span = _span()


@dataclass
class Monitor:
    test: Any
    recovery: Any
    task: Any
    span: Span = _span()


@dataclass
class Attempt:
    n: int
    task: Any
    span: Span = _span()


@dataclass
class FallbackOver:
    items: Any
    fn: str
    span: Span = _span()


@dataclass
class If:
    cond: Any
    then: Any
    orelse: Any
    span: Span = _span()


@dataclass
class MapCmp:
    op: str
    value: int
    inner: Any
    span: Span = _span()


@dataclass
class Definition:
    name: str
    params: tuple
    body: Any
    span: Span = _span()


@dataclass
class ProgramAst:
    definitions: list

    def get(self, name: str) -> Definition | None:
        return next((d for d in self.definitions if d.name == name), None)


# -- lexer -----------------------------------------------------------------------

KEYWORDS = {"if", "then", "else", "rSelect", "monitor", "both", "attempt",
            "fallbackOver", "cmp", "pure", "when", "unless", "true", "false"}
CMP_OPS = ("<=", ">=", "==", "!=", "<", ">")

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>(--|\#)[^\n]*)
  | (?P<nl>\n)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\|\|\||<-|<=|>=|==|!=|[<>=();,?])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # IDENT INT KW SYM SEP EOF
    text: str
    span: Span


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", Span(file, line, col, col))
        kind = m.lastgroup
        value = m.group()
        pos = m.end()
        if kind == "nl":
            line, line_start = line + 1, pos
            continue
        if kind in ("ws", "comment"):
            continue
        span = Span(file, line, col, col + len(value))
        if col == 1 and tokens:
            tokens.append(Token("SEP", "", span))
        if kind == "ident":
            kind = "KW" if value in KEYWORDS else "IDENT"
        tokens.append(Token(kind.upper() if kind != "KW" else "KW", value, span))
    tokens.append(Token("EOF", "", Span(file, line, pos - line_start + 1, pos - line_start + 1)))
    return tokens


# -- parser ------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def take(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = repr(text) if text else kind.lower()
            raise DslError(f"expected {want}, found {self._describe(self.tok)}", self.tok.span)
        return self.take()

    @staticmethod
    def _describe(t: Token) -> str:
        if t.kind == "EOF":
            return "end of input"
        if t.kind == "SEP":
            return "start of a new definition (continuation lines must be indented)"
        return repr(t.text)

    # program := definition (SEP definition)*
    def program(self) -> ProgramAst:
        defs = []
        seen: dict[str, Definition] = {}
        while not self.at("EOF"):
            d = self.definition()
            if d.name in seen:
                raise DslError(f"duplicate definition of {d.name!r} "
                               f"(first defined at {seen[d.name].span})", d.span)
            seen[d.name] = d
            defs.append(d)
            if self.at("SEP"):
                self.take()
            elif not self.at("EOF"):
                raise DslError(f"unexpected {self._describe(self.tok)}", self.tok.span)
        return ProgramAst(defs)

    def definition(self) -> Definition:
        name = self.expect("IDENT")
        params = []
        if self.at("SYM", "("):
            self.take()
            if not self.at("SYM", ")"):
                params.append(self.expect("IDENT").text)
                while self.at("SYM", ","):
                    self.take()
                    params.append(self.expect("IDENT").text)
            self.expect("SYM", ")")
            if len(set(params)) != len(params):
                raise DslError(f"repeated parameter in {name.text}", name.span)
        self.expect("SYM", "=")
        return Definition(name.text, tuple(params), self.expr(), name.span)

    def expr(self):
        left = self.par()
        if self.at("SYM", "?"):
            op = self.take()
            return Fallback(left, self.expr(), op.span)
        return left

    def par(self):
        left = self.seq()
        if self.at("SYM", "|||"):
            op = self.take()
            return Parallel(left, self.par(), op.span)
        return left

    def seq(self):
        items = [self.stmt()]
        while self.at("SYM", ";"):
            self.take()
            items.append(self.stmt())
        return self._chain(items)

    def _chain(self, items):
        out = None
        for i, (var, e, span) in enumerate(items):
            if var is not None:
                rest = items[i + 1:]
                if not rest:
                    raise DslError(f"binding of {var!r} must be followed by '; ...'", span)
                node = Bind(var, e, self._chain(rest), span)
                return node if out is None else Seq(out, node, span)
            out = e if out is None else Seq(out, e, span)
        return out

    def stmt(self):
        if self.at("IDENT") and self.toks[self.i + 1].kind == "SYM" \
                and self.toks[self.i + 1].text == "<-":
            var = self.take()
            self.take()
            return var.text, self.primary(), var.span
        e = self.primary()
        return None, e, getattr(e, "span", None)

    def args(self, n: int | None = None) -> list:
        self.expect("SYM", "(")
        out = []
        if not self.at("SYM", ")"):
            out.append(self.expr())
            while self.at("SYM", ","):
                self.take()
                out.append(self.expr())
        self.expect("SYM", ")")
        return out

    def _arity(self, kw: Token, args: list, n: int):
        if len(args) != n:
            raise DslError(f"{kw.text} takes {n} arguments, got {len(args)}", kw.span)

    def primary(self):
        t = self.tok
        if t.kind == "KW":
            return self.keyword()
        if t.kind == "INT":
            self.take()
            return Lit(int(t.text), t.span)
        if t.kind == "IDENT":
            self.take()
            if self.at("SYM", "("):
                return Call(t.text, tuple(self.args()), t.span)
            return VarRef(t.text, t.span)
        if self.at("SYM", "("):
            self.take()
            e = self.expr()
            self.expect("SYM", ")")
            return e
        raise DslError(f"expected an expression, found {self._describe(t)}", t.span)

    def keyword(self):
        kw = self.take()
        k = kw.text
        if k in ("true", "false"):
            return Lit(k == "true", kw.span)
        if k == "if":
            cond = self.expr()
            self.expect("KW", "then")
            then = self.expr()
            self.expect("KW", "else")
            return If(cond, then, self.expr(), kw.span)
        if k in ("when", "unless"):
            args = self.args()
            self._arity(kw, args, 2)
            cond, body = args
            if k == "when":
                return If(cond, body, Pure(None, kw.span), kw.span)
            return If(cond, Pure(None, kw.span), body, kw.span)
        if k == "rSelect":
            args = self.args()
            self._arity(kw, args, 3)
            return RSelect(*args, kw.span)
        if k == "monitor":
            args = self.args()
            self._arity(kw, args, 3)
            return Monitor(*args, kw.span)
        if k == "both":
            args = self.args()
            self._arity(kw, args, 2)
            return Both(*args, kw.span)
        if k == "attempt":
            self.expect("SYM", "(")
            n = self.expect("INT")
            self.expect("SYM", ",")
            task = self.expr()
            self.expect("SYM", ")")
            return Attempt(int(n.text), task, kw.span)
        if k == "fallbackOver":
            self.expect("SYM", "(")
            items = self.expr()
            self.expect("SYM", ",")
            fn = self.expect("IDENT")
            self.expect("SYM", ")")
            return FallbackOver(items, fn.text, kw.span)
        if k == "cmp":
            self.expect("SYM", "(")
            op = self.take()
            if op.text not in CMP_OPS:
                raise DslError(f"expected a comparison operator, found {op.text!r}", op.span)
            self.expect("SYM", ",")
            n = self.expect("INT")
            self.expect("SYM", ",")
            inner = self.expr()
            self.expect("SYM", ")")
            return MapCmp(op.text, int(n.text), inner, kw.span)
        if k == "pure":
            self.expect("SYM", "(")
            value = None
            if not self.at("SYM", ")"):
                lit = self.primary()
                if not isinstance(lit, Lit):
                    raise DslError("pure takes a literal (integer, true or false)", kw.span)
                value = lit
            self.expect("SYM", ")")
            return Pure(value, kw.span)
        raise DslError(f"unexpected keyword {k!r}", kw.span)


def parse(text: str, file: str = "<input>") -> ProgramAst:
    return _Parser(tokenize(text, file)).program()


def parse_expr(text: str, file: str = "<input>"):
    p = _Parser(tokenize(text, file))
    e = p.expr()
    if not p.at("EOF"):
        raise DslError(f"unexpected {p._describe(p.tok)}", p.tok.span)
    return e


def parse_file(path) -> ProgramAst:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


# -- pretty printer ------------------------------------------------------------------

_PREC = {Fallback: 0, Parallel: 1, Seq: 2, Bind: 2}


def _prec(e) -> int:
    return _PREC.get(type(e), 3)


def _ends_open(e) -> bool:
    """Whether trailing text could be absorbed into ``e`` when reparsed."""
    if isinstance(e, (Bind, If)):
        return True
    if isinstance(e, Seq):
        return _ends_open(e.second)
    if isinstance(e, Fallback):
        return _ends_open(e.second)
    if isinstance(e, Parallel):
        return _ends_open(e.right)
    return False


def _lit(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def pretty_expr(e, level: int = 0, last: bool = True) -> str:
    if _prec(e) < level or (not last and _ends_open(e)):
        return "(" + pretty_expr(e, 0, True) + ")"
    p = pretty_expr
    if isinstance(e, Fallback):
        return f"{p(e.first, 1, False)} ? {p(e.second, 0, last)}"
    if isinstance(e, Parallel):
        return f"{p(e.left, 2, False)} ||| {p(e.right, 1, last)}"
    if isinstance(e, Seq):
        if isinstance(e.second, Bind):
            right = p(e.second, 2, last)
        else:
            right = p(e.second, 3, last)
        return f"{p(e.first, 2, False)} ; {right}"
    if isinstance(e, Bind):
        return f"{e.var} <- {p(e.first, 3, False)} ; {p(e.body, 2, last)}"
    if isinstance(e, If):
        return f"if {p(e.cond)} then {p(e.then)} else {p(e.orelse, 0, last)}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(p(a) for a in e.args)})"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Lit):
        return _lit(e.value)
    if isinstance(e, Pure):
        return "pure()" if e.value is None else f"pure({_lit(e.value.value)})"
    if isinstance(e, RSelect):
        return f"rSelect({p(e.test)}, {p(e.left)}, {p(e.right)})"
    if isinstance(e, Monitor):
        return f"monitor({p(e.test)}, {p(e.recovery)}, {p(e.task)})"
    if isinstance(e, Both):
        return f"both({p(e.left)}, {p(e.right)})"
    if isinstance(e, Attempt):
        return f"attempt({e.n}, {p(e.task)})"
    if isinstance(e, FallbackOver):
        return f"fallbackOver({p(e.items)}, {e.fn})"
    if isinstance(e, MapCmp):
        return f"cmp({e.op}, {e.value}, {p(e.inner)})"
    raise TypeError(f"cannot print {e!r}")


def pretty(program: ProgramAst) -> str:
    lines = []
    for d in program.definitions:
        head = d.name + (f"({', '.join(d.params)})" if d.params else "")
        lines.append(f"{head} = {pretty_expr(d.body)}")
    return "\n".join(lines) + "\n"
