"""Composition operators over behaviors.

Non-reactive: ``bind``, ``then``, ``fallback``, ``fallback_over``, ``attempt``.
Concurrent: ``parallel`` (first to finish wins), ``both`` (wait for both).
Reactive: ``rselect`` (symmetric switching) and ``monitor`` (one-sided:
the recovery is never interrupted by the test).
"""

from __future__ import annotations

from typing import Any, Callable, Sequence

from .behavior import Behavior, Pure, ThrowFailed, pure, sleep, throw_failed  # noqa: F401
from .errors import BehaviorError, BehaviorFailed, ErrorKind
from .executor import PHASE_TEST


def _as_list(xs) -> str:
    return ", ".join(x.describe() for x in xs)


class Bind(Behavior):
    """Run ``first`` then feed its value to ``fn`` and run the result."""

    name = "bind"

    def __init__(self, first: Behavior, fn: Callable[[Any], Behavior], label: str = "f"):
        self.first = first
        self.fn = fn
        self.label = label

    @property
    def actuating(self) -> bool:
        # the continuation is opaque until runtime; assume the worst
        return True

    def children(self):
        return (self.first,)

    def describe(self):
        return f"bind({self.first.describe()}, {self.label})"

    async def execute(self, ctx):
        value = await ctx.run(self.first)
        return await ctx.run(self.fn(value))


def bind(first: Behavior, fn: Callable[[Any], Behavior], label: str = "f") -> Bind:
    return Bind(first, fn, label)


class Then(Behavior):
    name = "then"

    def __init__(self, first: Behavior, second: Behavior):
        self.first = first
        self.second = second

    def children(self):
        return (self.first, self.second)

    def describe(self):
        return f"{self.first.describe()} ; {self.second.describe()}"

    async def execute(self, ctx):
        await ctx.run(self.first)
        return await ctx.run(self.second)


def then(first: Behavior, *rest: Behavior) -> Behavior:
    out = first
    for b in rest:
        out = Then(out, b)
    return out


class Fallback(Behavior):
    """Run ``first``; only if it fails, run ``second``."""

    name = "fallback"

    def __init__(self, first: Behavior, second: Behavior):
        self.first = first
        self.second = second

    def children(self):
        return (self.first, self.second)

    def describe(self):
        return f"({self.first.describe()} ? {self.second.describe()})"

    async def execute(self, ctx):
        try:
            return await ctx.run(self.first)
        except BehaviorFailed:
            return await ctx.run(self.second)


def fallback(first: Behavior, *rest: Behavior) -> Behavior:
    out = first
    for b in rest:
        out = Fallback(out, b)
    return out


class FallbackOver(Behavior):
    """Try ``fn(x)`` for each item in order; first success wins."""

    name = "fallbackOver"

    def __init__(self, items: Sequence, fn: Callable[[Any], Behavior], label: str = "f"):
        self.items = tuple(items)
        self.fn = fn
        self.label = label

    @property
    def actuating(self) -> bool:
        return True

    def describe(self):
        return f"fallbackOver([{', '.join(map(str, self.items))}], {self.label})"

    async def execute(self, ctx):
        if not self.items:
            raise ctx.failure(ErrorKind.EXHAUSTED, "no items to fall back over")
        last = None
        for item in self.items:
            try:
                return await ctx.run(self.fn(item))
            except BehaviorFailed as exc:
                last = exc
        raise last


def fallback_over(items: Sequence, fn: Callable[[Any], Behavior], label: str = "f") -> FallbackOver:
    return FallbackOver(items, fn, label)


class Attempt(Behavior):
    """Run ``task`` up to ``n`` times until it succeeds."""

    name = "attempt"

    def __init__(self, n: int, task: Behavior):
        if n < 0:
            raise ValueError("attempt count must be >= 0")
        self.n = n
        self.task = task

    def children(self):
        return (self.task,)

    def describe(self):
        return f"attempt({self.n}, {self.task.describe()})"

    async def execute(self, ctx):
        if self.n == 0:
            raise ctx.failure(ErrorKind.EXHAUSTED, "attempt(0, ...) never runs its task")
        last = None
        for _ in range(self.n):
            try:
                return await ctx.run(self.task)
            except BehaviorFailed as exc:
                last = exc
        raise last


def attempt(n: int, task: Behavior) -> Attempt:
    return Attempt(n, task)


class Parallel(Behavior):
    """Run both; the first to finish decides the outcome and the other is cancelled.

    A failure beats a success that lands in the same tick.
    """

    name = "parallel"

    def __init__(self, left: Behavior, right: Behavior):
        self.left = left
        self.right = right

    def children(self):
        return (self.left, self.right)

    def describe(self):
        return f"({self.left.describe()} ||| {self.right.describe()})"

    async def execute(self, ctx):
        a = ctx.spawn(self.left)
        b = ctx.spawn(self.right)
        winner = await ctx.wait_any(a, b)
        other = b if winner is a else a
        # let the rest of this tick's steps run so a same-tick finish of the
        # other child is seen too; failure then wins regardless of position
        if other.live:
            await ctx.wait_any(other, timeout=0, phase=PHASE_TEST)
        ctx.cancel(other)
        for h in (a, b):
            if h.failed:
                h.result()
        return None


def parallel(left: Behavior, right: Behavior) -> Parallel:
    return Parallel(left, right)


class Both(Behavior):
    """Run both to success; the first failure cancels the other."""

    name = "both"

    def __init__(self, left: Behavior, right: Behavior):
        self.left = left
        self.right = right

    def children(self):
        return (self.left, self.right)

    def describe(self):
        return f"both({self.left.describe()}, {self.right.describe()})"

    async def execute(self, ctx):
        pending = [ctx.spawn(self.left), ctx.spawn(self.right)]
        while pending:
            done = await ctx.wait_any(*pending)
            pending.remove(done)
            if done.failed:
                for h in pending:
                    ctx.cancel(h)
                done.result()
        return None


def both(left: Behavior, right: Behavior) -> Both:
    return Both(left, right)


class MapOutcome(Behavior):
    """Apply a pure function to a successful result; failures pass through."""

    name = "map"

    def __init__(self, inner: Behavior, fn: Callable[[Any], Any], label: str = "f"):
        self.inner = inner
        self.fn = fn
        self.label = label

    def children(self):
        return (self.inner,)

    def describe(self):
        return f"{self.label} <$> {self.inner.describe()}"

    async def execute(self, ctx):
        return self.fn(await ctx.run(self.inner))


def map_outcome(inner: Behavior, fn: Callable[[Any], Any], label: str = "f") -> MapOutcome:
    return MapOutcome(inner, fn, label)


class When(Behavior):
    """Non-reactive guard on a boolean already computed."""

    def __init__(self, cond: bool, body: Behavior, negate: bool = False):
        self.cond = cond
        self.body = body
        self.negate = negate
        self.name = "unless" if negate else "when"

    def children(self):
        return (self.body,)

    def describe(self):
        return f"{self.name}({str(self.cond).lower()}, {self.body.describe()})"

    async def execute(self, ctx):
        if bool(self.cond) != self.negate:
            await ctx.run(self.body)
        return None


def when(cond: bool, body: Behavior) -> When:
    return When(cond, body)


def unless(cond: bool, body: Behavior) -> When:
    return When(cond, body, negate=True)


class Lazy(Behavior):
    """Build the wrapped behavior only when executed (allows recursive definitions)."""

    name = "lazy"

    def __init__(self, thunk: Callable[[], Behavior], label: str = "lazy"):
        self.thunk = thunk
        self.label = label

    @property
    def actuating(self) -> bool:
        return True

    def describe(self):
        return self.label

    async def execute(self, ctx):
        return await ctx.run(self.thunk())


def lazy(thunk: Callable[[], Behavior], label: str = "lazy") -> Lazy:
    return Lazy(thunk, label)


class Holds(Behavior):
    """Succeed iff the condition reads true; a false reading is a failure."""

    name = "holds"

    def __init__(self, test: Behavior):
        self.test = test

    def children(self):
        return (self.test,)

    def describe(self):
        return f"holds({self.test.describe()})"

    async def execute(self, ctx):
        value = await ctx.run(self.test, test_position=True)
        if value is not True:
            raise ctx.failure(ErrorKind.CONDITION_FAILED,
                              f"{self.test.describe()} is false")
        return None


def holds(test: Behavior) -> Holds:
    return Holds(test)


# -- reactive primitives -------------------------------------------------------

async def _read(ctx, node: Behavior, probe, live=None) -> bool:
    """Turn a finished test probe into a boolean or a ConditionFailed failure."""
    if probe.failed:
        if live is not None:
            ctx.cancel(live)
        err: BehaviorError = probe.outcome.error
        if err.kind in (ErrorKind.CONDITION_FAILED, ErrorKind.ACTUATION_IN_TEST_POSITION):
            raise BehaviorFailed(err)
        raise ctx.failure(ErrorKind.CONDITION_FAILED,
                          f"test failed with {err.kind.value}: {err.message}",
                          source=err.source)
    value = probe.outcome.value
    if not isinstance(value, bool):
        if live is not None:
            ctx.cancel(live)
        raise ctx.failure(ErrorKind.CONDITION_FAILED,
                          f"test returned non-boolean {value!r}")
    ctx.emit("test", value=value)
    return value


async def _read_now(ctx, test: Behavior) -> bool:
    probe = ctx.spawn(test, test_position=True)
    await ctx.wait_any(probe)
    return await _read(ctx, test, probe)


async def _race(ctx, test: Behavior, live):
    """Poll ``test`` while ``live`` runs.

    Returns ``(True, None)`` when ``live`` finished (its outcome is on the
    handle) or ``(False, reading)`` when a poll produced a reading.  Completion
    always wins a same-tick race with a poll.
    """
    poll = ctx.config.test_poll_period
    if await ctx.wait_any(live, timeout=poll, phase=PHASE_TEST) is live:
        return True, None
    probe = ctx.spawn(test, test_position=True)
    done = await ctx.wait_any(live, probe)
    if done is live:
        ctx.cancel(probe)
        return True, None
    return False, await _read(ctx, test, probe, live)


class RSelect(Behavior):
    """While ``test`` reads true run ``left``, else ``right``; switch on every change."""

    name = "rSelect"

    def __init__(self, test: Behavior, left: Behavior, right: Behavior):
        self.test = test
        self.left = left
        self.right = right

    def children(self):
        return (self.left, self.right)

    def describe(self):
        return f"rSelect({_as_list((self.test, self.left, self.right))})"

    async def execute(self, ctx):
        value = await _read_now(ctx, self.test)
        live = ctx.spawn(self.left if value else self.right)
        while True:
            finished, reading = await _race(ctx, self.test, live)
            if finished:
                return live.result()
            if reading != value:
                ctx.cancel(live)
                ctx.emit("switch", **{"from": "left" if value else "right",
                                      "to": "left" if reading else "right"})
                value = reading
                live = ctx.spawn(self.left if value else self.right)


def rselect(test: Behavior, left: Behavior, right: Behavior) -> RSelect:
    return RSelect(test, left, right)


class Monitor(Behavior):
    """Run ``task`` while ``test`` reads false.

    A true reading interrupts the task and runs ``recovery`` to completion
    without looking at the test; afterwards the test is read again and the
    task restarts from scratch if it is false.
    """

    name = "monitor"

    def __init__(self, test: Behavior, recovery: Behavior, task: Behavior):
        self.test = test
        self.recovery = recovery
        self.task = task

    def children(self):
        return (self.recovery, self.task)

    def describe(self):
        return f"monitor({_as_list((self.test, self.recovery, self.task))})"

    async def execute(self, ctx):
        value = await _read_now(ctx, self.test)
        previous = None
        while True:
            if value:
                previous = "recovery"
                await ctx.run(self.recovery)
                value = await _read_now(ctx, self.test)
                continue
            if previous == "recovery":
                ctx.emit("switch", **{"from": "recovery", "to": "task"})
            previous = "task"
            live = ctx.spawn(self.task)
            while True:
                finished, reading = await _race(ctx, self.test, live)
                if finished:
                    return live.result()
                if reading:
                    ctx.cancel(live)
                    ctx.emit("switch", **{"from": "task", "to": "recovery"})
                    value = True
                    break


def monitor(test: Behavior, recovery: Behavior, task: Behavior) -> Monitor:
    return Monitor(test, recovery, task)


def naive_monitor(test: Behavior, recovery: Behavior, task: Behavior) -> Behavior:
    """Recursive monitor built only from non-reactive pieces.

    ``(test ? task) ; recovery ; naive_monitor(...)``.  Kept as a contrast to
    :func:`monitor`: it runs ``recovery`` after ``task`` succeeds and recurses,
    so it can never succeed.
    """
    return then(fallback(holds(test), task),
                then(recovery, lazy(lambda: naive_monitor(test, recovery, task),
                                    label="naiveMonitor")))
