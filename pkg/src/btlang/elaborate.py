"""Name resolution, type checking and elaboration of DSL programs.

Types are monomorphic: ``Null``, ``Bool``, ``Int``, ``Door``, ``Box`` and
lists ``[X]``.  Every expression is either a *value* of one of these types
or a *behavior* returning one.  Definitions with parameters are checked per
call site, with the argument types of that call.  Recursion is rejected;
``attempt`` and ``fallbackOver`` cover the usual recursive idioms.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass

from . import combinators as C
from . import dsl as A
from .behavior import Sleep, pure, throw_failed
from .dsl import DslError
from .errors import ErrorKind
from .sim import SIGNATURES, standard_action

NULL, BOOL, INT, DOOR, BOX = "Null", "Bool", "Int", "Door", "Box"
ANY = "Any"  # type of `fail`, compatible with every behavior type

BUILTINS = {"fail", "sleep"}

CMP = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
       "==": operator.eq, "!=": operator.ne}


@dataclass(frozen=True)
class Ty:
    behavior: bool
    t: str

    def __str__(self):
        return f"Behavior {self.t}" if self.behavior else self.t


def _elem(t: str) -> str | None:
    return t[1:-1] if t.startswith("[") and t.endswith("]") else None


def _unify(a: str, b: str) -> str | None:
    if a == ANY:
        return b
    if b == ANY or a == b:
        return a
    return None


class Checker:
    """Type checks a program against an action signature table and constants."""

    def __init__(self, program: A.ProgramAst, signatures=None, constants=None):
        self.program = program
        self.sigs = SIGNATURES if signatures is None else signatures
        self.consts = dict(constants or {})
        self.defs = {d.name: d for d in program.definitions}
        self._memo: dict[tuple, Ty] = {}
        self._stack: list[str] = []
        for d in program.definitions:
            if d.name in self.sigs or d.name in BUILTINS or d.name in A.KEYWORDS:
                raise DslError(f"definition {d.name!r} shadows a built-in action", d.span)
            if d.name in self.consts:
                raise DslError(f"definition {d.name!r} shadows a world constant", d.span)

    def check_all(self) -> None:
        """Check every parameterless definition (parameterised ones are checked at use)."""
        for d in self.program.definitions:
            if not d.params:
                self.definition(d.name, (), d.span)

    def entry(self, name: str) -> Ty:
        d = self.defs.get(name)
        if d is None:
            raise DslError(f"no definition named {name!r}")
        if d.params:
            raise DslError(f"entry point {name!r} must not take parameters", d.span)
        ty = self.definition(name, (), d.span)
        if not ty.behavior:
            ty = Ty(True, ty.t)
        return ty

    def definition(self, name: str, arg_types: tuple, span) -> Ty:
        key = (name, arg_types)
        if key in self._memo:
            return self._memo[key]
        if name in self._stack:
            cycle = " -> ".join(self._stack[self._stack.index(name):] + [name])
            raise DslError(f"recursive definition: {cycle}", span)
        d = self.defs[name]
        if len(arg_types) != len(d.params):
            raise DslError(f"{name} takes {len(d.params)} argument(s), "
                           f"got {len(arg_types)}", span)
        self._stack.append(name)
        try:
            ty = self.expr(d.body, dict(zip(d.params, arg_types)))
        finally:
            self._stack.pop()
        self._memo[key] = ty
        return ty

    # -- helpers -----------------------------------------------------------------
    def behavior(self, e, env) -> str:
        """Type returned by ``e`` used as a behavior (values lift to pure)."""
        return self.expr(e, env).t

    def value(self, e, env, what: str) -> str:
        ty = self.expr(e, env)
        if ty.behavior:
            raise DslError(f"{what} must be a value, not a behavior ({ty}); "
                           f"bind it first with 'x <- ...'", e.span)
        return ty.t

    def want(self, got: str, expected: str, span, what: str) -> None:
        if _unify(got, expected) is None:
            raise DslError(f"{what} has type {got}, expected {expected}", span)

    def same(self, a: str, b: str, span, what: str) -> str:
        t = _unify(a, b)
        if t is None:
            raise DslError(f"{what} have different types: {a} and {b}", span)
        return t

    # -- expressions ----------------------------------------------------------------
    def expr(self, e, env: dict) -> Ty:
        m = getattr(self, "_" + type(e).__name__)
        return m(e, env)

    def _Lit(self, e, env):
        return Ty(False, BOOL if isinstance(e.value, bool) else INT)

    def _Pure(self, e, env):
        return Ty(True, NULL if e.value is None else self._Lit(e.value, env).t)

    def _VarRef(self, e, env):
        n = e.name
        if n in env:
            return env[n]
        if n in self.defs:
            if self.defs[n].params:
                raise DslError(f"{n} takes {len(self.defs[n].params)} argument(s)", e.span)
            return self.definition(n, (), e.span)
        if n in self.sigs:
            sig = self.sigs[n]
            if sig.params:
                raise DslError(f"{n} takes {len(sig.params)} argument(s)", e.span)
            return Ty(True, sig.returns)
        if n == "fail":
            return Ty(True, ANY)
        if n in self.consts:
            return Ty(False, self.consts[n])
        raise DslError(f"unbound name {n!r}", e.span)

    def _Call(self, e, env):
        n = e.name
        if n in env:
            raise DslError(f"{n} is a variable, not something that can be called", e.span)
        if n in self.defs:
            arg_types = tuple(self.expr(a, env) for a in e.args)
            return self.definition(n, arg_types, e.span)
        if n in self.sigs:
            sig = self.sigs[n]
            if len(e.args) != len(sig.params):
                raise DslError(f"{n} takes {len(sig.params)} argument(s), "
                               f"got {len(e.args)}", e.span)
            for i, (a, p) in enumerate(zip(e.args, sig.params)):
                self.want(self.value(a, env, f"argument {i + 1} of {n}"), p, a.span,
                          f"argument {i + 1} of {n}")
            return Ty(True, sig.returns)
        if n == "sleep":
            if len(e.args) != 1 or not isinstance(e.args[0], A.Lit) \
                    or isinstance(e.args[0].value, bool) or e.args[0].value < 0:
                raise DslError("sleep takes one non-negative integer literal", e.span)
            return Ty(True, NULL)
        if n == "fail":
            raise DslError("fail takes no arguments", e.span)
        raise DslError(f"unbound name {n!r}", e.span)

    def _Seq(self, e, env):
        self.behavior(e.first, env)
        return Ty(True, self.behavior(e.second, env))

    def _Bind(self, e, env):
        t = self.behavior(e.first, env)
        return Ty(True, self.behavior(e.body, {**env, e.var: Ty(False, t)}))

    def _Fallback(self, e, env):
        a, b = self.behavior(e.first, env), self.behavior(e.second, env)
        return Ty(True, self.same(a, b, e.span, "both sides of '?'"))

    def _Parallel(self, e, env):
        self.behavior(e.left, env)
        self.behavior(e.right, env)
        return Ty(True, NULL)

    _Both = _Parallel

    def _cond(self, e, env, what):
        self.want(self.behavior(e, env), BOOL, e.span, what)

    def _RSelect(self, e, env):
        self._cond(e.test, env, "rSelect test")
        a, b = self.behavior(e.left, env), self.behavior(e.right, env)
        return Ty(True, self.same(a, b, e.span, "rSelect branches"))

    def _Monitor(self, e, env):
        self._cond(e.test, env, "monitor test")
        r = self.behavior(e.recovery, env)
        if r not in (NULL, ANY):
            raise DslError(f"monitor recovery must return Null, got {r}", e.recovery.span
                           or e.span)
        return Ty(True, self.behavior(e.task, env))

    def _Attempt(self, e, env):
        return Ty(True, self.behavior(e.task, env))

    def _fn_type(self, name: str, arg: str, span) -> str:
        if name in self.defs:
            return self.definition(name, (Ty(False, arg),), span).t
        if name in self.sigs:
            sig = self.sigs[name]
            if len(sig.params) != 1:
                raise DslError(f"{name} must take exactly one argument", span)
            self.want(arg, sig.params[0], span, f"argument of {name}")
            return sig.returns
        raise DslError(f"unbound name {name!r}", span)

    def _FallbackOver(self, e, env):
        t = self.behavior(e.items, env)
        elem = _elem(t)
        if elem is None:
            raise DslError(f"fallbackOver needs a list, got {t}", e.span)
        return Ty(True, self._fn_type(e.fn, elem, e.span))

    def _If(self, e, env):
        self._cond(e.cond, env, "if condition")
        a, b = self.behavior(e.then, env), self.behavior(e.orelse, env)
        return Ty(True, self.same(a, b, e.span, "if branches"))

    def _MapCmp(self, e, env):
        self.want(self.behavior(e.inner, env), INT, e.span, "cmp operand")
        return Ty(True, BOOL)


class Builder:
    """Turns a checked AST into combinator values.

    Values bound with ``<-`` only exist at run time, so everything under a
    binding is built inside the continuation passed to ``bind``.
    """

    def __init__(self, program: A.ProgramAst, constants=None):
        self.defs = {d.name: d for d in program.definitions}
        self.consts = dict(constants or {})

    def entry(self, name: str = "bt"):
        return self.behavior(self.defs[name].body, {})

    def value(self, e, env):
        if isinstance(e, A.Lit):
            return e.value
        if isinstance(e, A.VarRef):
            if e.name in env:
                return env[e.name]
            if e.name in self.consts:
                return e.name
        raise DslError(f"{A.pretty_expr(e)} is not a value", e.span)

    def _is_value(self, e, env) -> bool:
        if isinstance(e, A.Lit):
            return True
        if isinstance(e, A.VarRef):
            if e.name in env:
                return not _is_behavior(env[e.name])
            return e.name in self.consts and e.name not in self.defs
        return False

    def arg(self, e, env):
        """Call-by-value for values, call-by-name (a behavior) otherwise."""
        if self._is_value(e, env):
            return self.value(e, env)
        return _Thunk(self.behavior(e, env))

    def behavior(self, e, env):
        m = getattr(self, "_" + type(e).__name__)
        return m(e, env)

    def _Lit(self, e, env):
        return pure(e.value)

    def _Pure(self, e, env):
        return pure(None if e.value is None else e.value.value)

    def _VarRef(self, e, env):
        n = e.name
        if n in env:
            v = env[n]
            return v.behavior if isinstance(v, _Thunk) else pure(v)
        if n in self.defs:
            return self.behavior(self.defs[n].body, {})
        if n in SIGNATURES:
            return standard_action(n)
        if n == "fail":
            return throw_failed(ErrorKind.ACTION_FAILED, "fail")
        return pure(n)

    def _Call(self, e, env):
        n = e.name
        if n in self.defs:
            d = self.defs[n]
            return self.behavior(d.body, {p: self.arg(a, env) for p, a in zip(d.params, e.args)})
        if n == "sleep":
            return Sleep(e.args[0].value)
        return standard_action(n, *(self.value(a, env) for a in e.args))

    def _Seq(self, e, env):
        return C.then(self.behavior(e.first, env), self.behavior(e.second, env))

    def _Bind(self, e, env):
        return C.bind(self.behavior(e.first, env),
                      lambda v: self.behavior(e.body, {**env, e.var: v}), label=e.var)

    def _Fallback(self, e, env):
        return C.fallback(self.behavior(e.first, env), self.behavior(e.second, env))

    def _Parallel(self, e, env):
        return C.parallel(self.behavior(e.left, env), self.behavior(e.right, env))

    def _Both(self, e, env):
        return C.both(self.behavior(e.left, env), self.behavior(e.right, env))

    def _RSelect(self, e, env):
        return C.rselect(self.behavior(e.test, env), self.behavior(e.left, env),
                         self.behavior(e.right, env))

    def _Monitor(self, e, env):
        return C.monitor(self.behavior(e.test, env), self.behavior(e.recovery, env),
                         self.behavior(e.task, env))

    def _Attempt(self, e, env):
        return C.attempt(e.n, self.behavior(e.task, env))

    def _apply(self, fn: str, x):
        if fn in self.defs:
            d = self.defs[fn]
            return self.behavior(d.body, {d.params[0]: x})
        return standard_action(fn, x)

    def _FallbackOver(self, e, env):
        fn = e.fn
        if self._is_value(e.items, env):
            return C.fallback_over(self.value(e.items, env), lambda x: self._apply(fn, x), fn)
        return C.bind(self.behavior(e.items, env),
                      lambda xs: C.fallback_over(xs, lambda x: self._apply(fn, x), fn),
                      label="items")

    def _If(self, e, env):
        if self._is_value(e.cond, env):
            cond = self.value(e.cond, env)
            # when(c, a) and unless(c, a) keep their own node in the trace
            if _is_unit(e.then):
                return C.unless(cond, self.behavior(e.orelse, env))
            if _is_unit(e.orelse):
                return C.when(cond, self.behavior(e.then, env))
            return self.behavior(e.then if cond else e.orelse, env)
        return C.bind(self.behavior(e.cond, env),
                      lambda b: self.behavior(e.then if b else e.orelse, env), label="if")

    def _MapCmp(self, e, env):
        f, n = CMP[e.op], e.value
        return C.map_outcome(self.behavior(e.inner, env), lambda v: f(v, n),
                             label=f"({e.op}{n})")


def _is_unit(e) -> bool:
    return isinstance(e, A.Pure) and e.value is None


class _Thunk:
    """A behavior passed as an argument to a parameterised definition."""

    __slots__ = ("behavior",)

    def __init__(self, behavior):
        self.behavior = behavior


def _is_behavior(v) -> bool:
    return isinstance(v, _Thunk)


def default_constants(doors=("frontDoor", "backDoor"), boxes=("box17",)) -> dict:
    consts = {d: DOOR for d in doors}
    consts.update({b: BOX for b in boxes})
    return consts


def elaborate(program: A.ProgramAst, entry: str = "bt", constants=None):
    """Check ``program`` and build the behavior named ``entry``."""
    consts = default_constants() if constants is None else constants
    checker = Checker(program, constants=consts)
    checker.check_all()
    checker.entry(entry)
    return Builder(program, consts).entry(entry)


def compile_source(text: str, entry: str = "bt", constants=None, file: str = "<input>"):
    return elaborate(A.parse(text, file), entry, constants)
