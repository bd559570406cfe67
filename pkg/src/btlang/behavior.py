"""Behavior values: inert, re-runnable descriptions of asynchronous actions."""

from __future__ import annotations

from typing import Any, Callable

from .errors import BehaviorError, ErrorKind


def _fmt_arg(a) -> str:
    if isinstance(a, str):
        return a
    if isinstance(a, (list, tuple)):
        return "[" + ", ".join(_fmt_arg(x) for x in a) + "]"
    if a is None:
        return "()"
    if isinstance(a, bool):
        return "true" if a else "false"
    return str(a)


def call_name(op: str, args=()) -> str:
    """``open(frontDoor)`` style label used for leaves in traces."""
    if not args:
        return op
    return f"{op}({', '.join(_fmt_arg(a) for a in args)})"


class Behavior:
    """Base class. Subclasses implement ``async def execute(self, ctx)``.

    A behavior never holds per-execution state on ``self``; everything
    mutable lives in the coroutine, so one value can be run any number of
    times, even concurrently.
    """

    name: str = "behavior"
    is_leaf: bool = False

    @property
    def actuating(self) -> bool:
        return any(c.actuating for c in self.children())

    def children(self) -> tuple:
        return ()

    def describe(self) -> str:
        return self.name

    async def execute(self, ctx):  # pragma: no cover - abstract
        raise NotImplementedError

    def __rshift__(self, other: "Behavior") -> "Behavior":
        from .combinators import then
        return then(self, other)

    def __or__(self, other: "Behavior") -> "Behavior":
        from .combinators import fallback
        return fallback(self, other)

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"


class Action(Behavior):
    """Leaf behavior.

    ``body`` is ``async (ctx, *args) -> value``; when omitted the action is
    looked up by ``op`` in the world's action table at execution time, so the
    same program can run against any world that provides the vocabulary.
    ``drains`` marks actions that consume battery while live.
    """

    is_leaf = True

    def __init__(self, op: str, args=(), body: Callable | None = None,
                 actuating: bool = True, drains: bool | None = None):
        if not op:
            raise ValueError("action name must be nonempty")
        self.op = op
        self.args = tuple(args)
        self.body = body
        self._actuating = actuating
        self.drains = actuating if drains is None else drains
        self.name = call_name(op, self.args)

    @property
    def actuating(self) -> bool:
        return self._actuating

    async def execute(self, ctx):
        if self._actuating and ctx.in_test:
            raise ctx.failure(ErrorKind.ACTUATION_IN_TEST_POSITION,
                              f"{self.name} actuates but runs as a condition")
        body = self.body
        if body is None:
            body = ctx.world.action_body(self.op)
        return await body(ctx, *self.args)


def action(name: str, body: Callable | None = None, actuating: bool = True,
           args=(), drains: bool | None = None) -> Action:
    return Action(name, args, body, actuating, drains)


class Pure(Behavior):
    def __init__(self, value: Any = None):
        self.value = value
        self.name = "pure"

    @property
    def actuating(self) -> bool:
        return False

    def describe(self) -> str:
        return "pure()" if self.value is None else f"pure({_fmt_arg(self.value)})"

    async def execute(self, ctx):
        return self.value


def pure(value: Any = None) -> Pure:
    return Pure(value)


class ThrowFailed(Behavior):
    def __init__(self, error: BehaviorError | ErrorKind = ErrorKind.ACTION_FAILED,
                 message: str = "failed"):
        if isinstance(error, ErrorKind):
            error = BehaviorError(error, "fail", message)
        self.error = error
        self.name = "fail"

    @property
    def actuating(self) -> bool:
        return False

    async def execute(self, ctx):
        from .errors import BehaviorFailed
        raise BehaviorFailed(BehaviorError(self.error.kind, self.error.source,
                                           self.error.message, ctx.now))


def throw_failed(error: BehaviorError | ErrorKind = ErrorKind.ACTION_FAILED,
                 message: str = "failed") -> ThrowFailed:
    return ThrowFailed(error, message)


class Sleep(Behavior):
    """Non-actuating wait of ``ticks`` virtual ticks."""

    is_leaf = True

    def __init__(self, ticks: int):
        if ticks < 0:
            raise ValueError("sleep ticks must be >= 0")
        self.ticks = ticks
        self.name = f"sleep({ticks})"
        self.drains = False

    @property
    def actuating(self) -> bool:
        return False

    async def execute(self, ctx):
        await ctx.sleep(self.ticks)
        return None


def sleep(ticks: int) -> Sleep:
    return Sleep(ticks)
