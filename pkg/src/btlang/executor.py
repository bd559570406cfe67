"""Deterministic virtual-tick executor for behaviors.

Every execution of a behavior is a coroutine driven by :class:`Executor`.
Coroutines never touch an event loop; they ``await`` small command objects
(sleep, wait) which the executor turns into entries of a single priority
queue ordered by ``(tick, phase, insertion sequence)``.  Nothing depends on
wall-clock time or hash ordering, so identical inputs give identical traces.

Within one tick the order is fixed:

1. the environment's ``on_tick`` hook (world physics, scripted injections),
2. every queued step in ``PHASE_STEP``,
3. every queued step in ``PHASE_TEST`` (periodic condition polls).

Cancellation is synchronous: :meth:`Executor.cancel` closes the coroutine of
every live execution in a subtree before returning, so a cancelled subtree
cannot emit anything afterwards.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Any, Iterator, NamedTuple, Union

from .errors import BehaviorError, BehaviorFailed, ErrorKind
from .trace import TraceEvent, TraceLog

PHASE_STEP = 0
PHASE_TEST = 1

LIVE = "live"
SUCCEEDED = "succeeded"
FAILED = "failed"
CANCELLED = "cancelled"


@dataclass(frozen=True)
class Success:
    value: Any = None


@dataclass(frozen=True)
class Failure:
    error: BehaviorError


@dataclass(frozen=True)
class BudgetExhausted:
    """Executor-level result: the root was still live when the budget ran out."""

    ticks: int
    reason: str = "tick budget exhausted"


Outcome = Union[Success, Failure]


@dataclass(frozen=True)
class ExecConfig:
    test_poll_period: int = 1
    max_ticks: int = 1000
    seed: int = 0
    # guards against behaviors that loop forever without advancing time
    max_steps_per_tick: int = 100_000

    def __post_init__(self):
        if self.test_poll_period < 1:
            raise ValueError("test_poll_period must be >= 1")
        if self.max_ticks < 1:
            raise ValueError("max_ticks must be >= 1")


class RunResult(NamedTuple):
    outcome: Union[Success, Failure, BudgetExhausted]
    trace: TraceLog


class _Sleep:
    __slots__ = ("ticks", "phase")

    def __init__(self, ticks: int, phase: int):
        self.ticks = ticks
        self.phase = phase

    def __await__(self):
        return (yield self)


class _Wait:
    __slots__ = ("handles", "timeout", "phase")

    def __init__(self, handles, timeout, phase):
        self.handles = handles
        self.timeout = timeout
        self.phase = phase

    def __await__(self):
        return (yield self)


class Execution:
    """One run of one behavior; doubles as the handle given to its parent."""

    def __init__(self, node_id: str, behavior, parent: "Execution | None", in_test: bool):
        self.id = node_id
        self.behavior = behavior
        self.parent = parent
        self.in_test = in_test
        self.state = LIVE
        self.outcome: Outcome | None = None
        self.children: list[Execution] = []
        self.coro = None
        self.token = 0
        self.waiters: list[tuple[Execution, int]] = []

    @property
    def live(self) -> bool:
        return self.state == LIVE

    @property
    def done(self) -> bool:
        return self.state in (SUCCEEDED, FAILED)

    @property
    def failed(self) -> bool:
        return self.state == FAILED

    def result(self):
        """Value of a finished execution; re-raises its failure."""
        if self.state == SUCCEEDED:
            return self.outcome.value
        if self.state == FAILED:
            raise BehaviorFailed(self.outcome.error)
        raise RuntimeError(f"execution {self.id} has no outcome ({self.state})")

    def __repr__(self):
        return f"<Execution {self.id} {self.behavior.name} {self.state}>"


class Context:
    """The capability handed to a running behavior."""

    def __init__(self, executor: "Executor", node: Execution):
        self._ex = executor
        self.node = node

    @property
    def now(self) -> int:
        return self._ex.now

    @property
    def world(self):
        return self._ex.env

    @property
    def config(self) -> ExecConfig:
        return self._ex.config

    @property
    def in_test(self) -> bool:
        return self.node.in_test

    def spawn(self, behavior, *, test_position: bool = False) -> Execution:
        return self._ex._spawn(behavior, self.node, test_position)

    def sleep(self, ticks: int = 1, *, phase: int = PHASE_STEP):
        if ticks < 0:
            raise ValueError("cannot sleep a negative number of ticks")
        return _Sleep(ticks, phase)

    def wait_any(self, *handles: Execution, timeout: int | None = None,
                 phase: int = PHASE_STEP):
        """Suspend until one handle finishes; ``None`` if ``timeout`` elapses first."""
        return _Wait(handles, timeout, phase)

    async def run(self, behavior, *, test_position: bool = False):
        handle = self.spawn(behavior, test_position=test_position)
        await self.wait_any(handle)
        return handle.result()

    def cancel(self, handle: Execution) -> None:
        self._ex.cancel(handle)

    def emit(self, kind: str, **detail) -> None:
        self._ex.record(kind, self.node.id, self.node.parent.id if self.node.parent else None,
                        self.node.behavior.name, detail)

    def failure(self, kind: ErrorKind, message: str, source: str | None = None) -> BehaviorFailed:
        return BehaviorFailed(BehaviorError(kind, source or self.node.behavior.name,
                                            message, self._ex.now))


class Executor:
    def __init__(self, env=None, config: ExecConfig | None = None):
        self.env = env
        self.config = config or ExecConfig()
        self.trace = TraceLog()
        self.now = 0
        self.time = 0  # next tick to process
        self._queue: list = []
        self._seq = itertools.count()
        self._trace_seq = itertools.count()
        self._ids = itertools.count()
        self._live_leaves: dict[str, Execution] = {}
        self._roots: list[Execution] = []
        self._steps_this_tick = 0
        self.livelocked = False

    # -- trace ---------------------------------------------------------------
    def record(self, kind: str, node: str, parent: str | None, name: str,
               detail: dict | None = None) -> None:
        self.trace.append(TraceEvent(self.now, next(self._trace_seq), kind, node,
                                     parent, name, dict(detail or {})))

    def live_leaves(self) -> Iterator[Execution]:
        return iter(list(self._live_leaves.values()))

    # -- spawning & scheduling -----------------------------------------------
    def start(self, behavior) -> Execution:
        """Start ``behavior`` as a root execution at the current tick."""
        node = self._spawn(behavior, None, False)
        self._roots.append(node)
        return node

    def _spawn(self, behavior, parent: Execution | None, test_position: bool) -> Execution:
        in_test = test_position or (parent is not None and parent.in_test)
        node = Execution(f"n{next(self._ids)}", behavior, parent, in_test)
        if parent is not None:
            parent.children.append(node)
        detail = {}
        if behavior.is_leaf:
            detail["leaf"] = True
            self._live_leaves[node.id] = node
        if test_position:
            detail["test"] = True
        self.record("start", node.id, parent.id if parent else None, behavior.name, detail)
        node.coro = behavior.execute(Context(self, node))
        self._schedule(self.now, PHASE_STEP, node)
        return node

    def _schedule(self, when: int, phase: int, node: Execution, value=None) -> None:
        heapq.heappush(self._queue, (when, phase, next(self._seq), node, node.token, value))

    # -- driving coroutines --------------------------------------------------
    def _resume(self, node: Execution, value=None) -> None:
        while True:
            try:
                cmd = node.coro.send(value)
            except StopIteration as stop:
                self._finish(node, Success(stop.value))
                return
            except BehaviorFailed as failed:
                self._finish(node, Failure(failed.error))
                return
            value = None
            if isinstance(cmd, _Sleep):
                self._schedule(self.now + cmd.ticks, cmd.phase, node)
                return
            if isinstance(cmd, _Wait):
                ready = next((h for h in cmd.handles if not h.live), None)
                if ready is not None:
                    if ready.state == CANCELLED:
                        raise RuntimeError(f"{node} waited on cancelled {ready}")
                    value = ready
                    continue
                for h in cmd.handles:
                    h.waiters.append((node, node.token))
                if cmd.timeout is not None:
                    self._schedule(self.now + cmd.timeout, cmd.phase, node)
                return
            raise TypeError(f"behavior {node.behavior.name} awaited unsupported {cmd!r}")

    def _finish(self, node: Execution, outcome: Outcome) -> None:
        # structured concurrency: nothing outlives its parent
        for child in reversed(node.children):
            self.cancel(child)
        node.outcome = outcome
        node.token += 1
        self._live_leaves.pop(node.id, None)
        parent_id = node.parent.id if node.parent else None
        if isinstance(outcome, Success):
            node.state = SUCCEEDED
            self.record("complete", node.id, parent_id, node.behavior.name,
                        {"value": outcome.value})
        else:
            node.state = FAILED
            self.record("fail", node.id, parent_id, node.behavior.name,
                        {"error": outcome.error.to_dict()})
        for waiter, token in node.waiters:
            if waiter.live and waiter.token == token:
                waiter.token += 1
                self._schedule(self.now, PHASE_STEP, waiter, node)
        node.waiters.clear()

    def cancel(self, node: Execution) -> None:
        """Cancel ``node`` and its live subtree. No-op on finished executions."""
        # children before parents, last child first; iterative because
        # recursive behaviors can nest thousands of executions deep
        stack = [(node, False)]
        while stack:
            current, expanded = stack.pop()
            if not current.live:
                continue
            if not expanded:
                stack.append((current, True))
                stack.extend((c, False) for c in current.children if c.live)
                continue
            current.state = CANCELLED
            current.token += 1
            current.coro.close()
            self._live_leaves.pop(current.id, None)
            self.record("cancel", current.id,
                        current.parent.id if current.parent else None,
                        current.behavior.name)

    # -- the tick loop -------------------------------------------------------
    def step_tick(self) -> None:
        """Process every event of the next tick."""
        t = self.time
        self.now = t
        self._steps_this_tick = 0
        if self.env is not None and hasattr(self.env, "on_tick"):
            self.env.on_tick(t, self)
        while self._queue and self._queue[0][0] == t:
            _, _, _, node, token, value = heapq.heappop(self._queue)
            if not node.live or node.token != token:
                continue
            node.token += 1
            self._steps_this_tick += 1
            if self._steps_this_tick > self.config.max_steps_per_tick:
                self.livelocked = True
                return
            self._resume(node, value)
            if all(not r.live for r in self._roots):
                break
        self.time = t + 1

    def run_until(self, tick: int) -> None:
        """Process ticks up to and including ``tick``."""
        while self.time <= tick and not self.livelocked:
            self.step_tick()

    def run(self, behavior) -> RunResult:
        root = self.start(behavior)
        while root.live and self.time < self.config.max_ticks and not self.livelocked:
            self.step_tick()
        if root.live:
            reason = ("step budget exhausted (behavior loops without advancing time)"
                      if self.livelocked else "tick budget exhausted")
            self.cancel(root)
            return RunResult(BudgetExhausted(self.time, reason), self.trace)
        return RunResult(root.outcome, self.trace)


def run(behavior, world=None, cfg: ExecConfig | None = None) -> RunResult:
    """Drive ``behavior`` against ``world`` until it finishes or the budget runs out."""
    return Executor(world, cfg).run(behavior)
