"""Classical tick-based behavior trees.

Used as an oracle for the reactive combinators and as the input language of
the reactive-selection-form translator.  The engine ticks the tree from the
root once per tick; after each tick every leaf that was Running but is no
longer on an all-Running path from the root is halted.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import yaml

from .behavior import Action, Behavior, call_name, pure, throw_failed
from .combinators import holds, rselect
from .errors import ConfigError, ErrorKind
from .executor import PHASE_STEP
from .trace import TraceEvent, TraceLog


class Status(enum.Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    RUNNING = "Running"


class NotApplicable(Exception):
    """The tree uses nodes outside the reactive Sequence/Fallback vocabulary."""


class NotInForm(Exception):
    """The tree is not in reactive selection form."""

    def __init__(self, subtree: "BtNode", reason: str):
        super().__init__(f"not in reactive selection form: {reason}: {render(subtree)}")
        self.subtree = subtree
        self.reason = reason


class CircularConditionWarning(UserWarning):
    pass


# -- tree nodes ----------------------------------------------------------------

@dataclass(frozen=True)
class ActionLeaf:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class ConditionLeaf:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Sequence:
    children: tuple


@dataclass(frozen=True)
class Fallback:
    children: tuple


@dataclass(frozen=True)
class SequenceMem:
    children: tuple


@dataclass(frozen=True)
class FallbackMem:
    children: tuple


@dataclass(frozen=True)
class Parallel:
    m: int
    children: tuple

    def __post_init__(self):
        if not 1 <= self.m <= len(self.children):
            raise ConfigError(f"Parallel threshold {self.m} outside 1..{len(self.children)}")


@dataclass(frozen=True)
class Inverter:
    child: object


@dataclass(frozen=True)
class Repeat:
    n: int
    child: object


@dataclass(frozen=True)
class RetryUntilSuccessful:
    n: int
    child: object


@dataclass(frozen=True)
class RunOnce:
    child: object


BtNode = object
LEAVES = (ActionLeaf, ConditionLeaf)
COMPOSITES = (Sequence, Fallback, SequenceMem, FallbackMem, Parallel)
DECORATORS = (Inverter, Repeat, RetryUntilSuccessful, RunOnce)


def children_of(node) -> tuple:
    if isinstance(node, COMPOSITES):
        return node.children
    if isinstance(node, DECORATORS):
        return (node.child,)
    return ()


def leaf_label(leaf) -> str:
    return call_name(leaf.name, leaf.args)


def render(node) -> str:
    """Compact infix rendering: ``?`` for Fallback, ``->`` for Sequence."""
    if isinstance(node, LEAVES):
        return leaf_label(node)
    if isinstance(node, (Sequence, Fallback)):
        op = " -> " if isinstance(node, Sequence) else " ? "
        return "(" + op.join(render(c) for c in node.children) + ")"
    kind = type(node).__name__
    if isinstance(node, Parallel):
        return f"Parallel{node.m}[" + ", ".join(render(c) for c in node.children) + "]"
    if isinstance(node, (SequenceMem, FallbackMem)):
        return f"{kind}[" + ", ".join(render(c) for c in node.children) + "]"
    if isinstance(node, (Repeat, RetryUntilSuccessful)):
        return f"{kind}{node.n}[{render(node.child)}]"
    return f"{kind}[{render(node.child)}]"


# -- tree files ----------------------------------------------------------------

_TYPES = {
    "sequence": Sequence, "fallback": Fallback, "sequencemem": SequenceMem,
    "fallbackmem": FallbackMem, "parallel": Parallel, "inverter": Inverter,
    "repeat": Repeat, "retryuntilsuccessful": RetryUntilSuccessful, "runonce": RunOnce,
    "action": ActionLeaf, "actionleaf": ActionLeaf,
    "condition": ConditionLeaf, "conditionleaf": ConditionLeaf,
}


def node_from_dict(data, where: str = "tree"):
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError(f"{where}: expected a record with a 'type' field")
    cls = _TYPES.get(str(data["type"]).lower())
    if cls is None:
        raise ConfigError(f"{where}: unknown node type {data['type']!r}")
    if cls in LEAVES:
        if not data.get("name"):
            raise ConfigError(f"{where}: leaf needs a 'name'")
        return cls(str(data["name"]), tuple(data.get("args") or ()))
    kids = data.get("children") or []
    if not isinstance(kids, list) or not kids:
        raise ConfigError(f"{where}: {data['type']} needs a nonempty 'children' list")
    nodes = tuple(node_from_dict(k, f"{where}.{i}") for i, k in enumerate(kids))
    if cls in DECORATORS:
        if len(nodes) != 1:
            raise ConfigError(f"{where}: decorator takes exactly one child")
        if cls in (Repeat, RetryUntilSuccessful):
            n = data.get("N", data.get("n"))
            if not isinstance(n, int) or n < 1:
                raise ConfigError(f"{where}: {data['type']} needs integer N >= 1")
            return cls(n, nodes[0])
        return cls(nodes[0])
    if cls is Parallel:
        m = data.get("M", data.get("m"))
        if not isinstance(m, int):
            raise ConfigError(f"{where}: Parallel needs integer M")
        return Parallel(m, nodes)
    return cls(nodes)


def node_to_dict(node) -> dict:
    if isinstance(node, LEAVES):
        out = {"type": "Action" if isinstance(node, ActionLeaf) else "Condition",
               "name": node.name}
        if node.args:
            out["args"] = list(node.args)
        return out
    out = {"type": type(node).__name__}
    if isinstance(node, Parallel):
        out["M"] = node.m
    if isinstance(node, (Repeat, RetryUntilSuccessful)):
        out["N"] = node.n
    out["children"] = [node_to_dict(c) for c in children_of(node)]
    return out


def load_tree(path) -> BtNode:
    """Read a tree from a YAML or JSON file (JSON is a YAML subset)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed tree file: {exc}") from exc
    if data is None:
        raise ConfigError(f"{path}: empty tree file")
    if isinstance(data, dict) and "tree" in data:
        data = data["tree"]
    return node_from_dict(data)


def dump_tree(node) -> str:
    return json.dumps({"tree": node_to_dict(node)}, indent=2)


# -- leaf bindings ---------------------------------------------------------------

class LeafInstance:
    """One activation of an action leaf; discarded on completion or halt."""

    def tick(self, t: int) -> Status:  # pragma: no cover - interface
        raise NotImplementedError

    def halt(self) -> None:
        pass


class TimedAction(LeafInstance):
    """Running until ``ticks`` ticks have passed since the first tick."""

    def __init__(self, ticks: int, result: Status = Status.SUCCESS):
        self.ticks = ticks
        self.result = result
        self.started: int | None = None

    def tick(self, t):
        if self.started is None:
            self.started = t
        return self.result if t >= self.started + self.ticks else Status.RUNNING


class ConstAction(LeafInstance):
    def __init__(self, status: Status):
        self.status = status

    def tick(self, t):
        return self.status


def timed(ticks: int, result: Status = Status.SUCCESS) -> Callable[..., LeafInstance]:
    return lambda *args: TimedAction(ticks, result)


def const(status: Status) -> Callable[..., LeafInstance]:
    return lambda *args: ConstAction(status)


def series(values) -> Callable[..., bool]:
    """Condition that reads ``values[t]`` (last value repeats)."""
    values = list(values)
    return lambda t, *args: bool(values[min(t, len(values) - 1)])


@dataclass
class BtProgram:
    root: object
    actions: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = []
        for leaf in iter_leaves(self.root):
            table = self.actions if isinstance(leaf, ActionLeaf) else self.conditions
            if leaf.name not in table:
                missing.append(leaf_label(leaf))
        if missing:
            raise ConfigError(f"unbound leaves: {', '.join(sorted(set(missing)))}")


def iter_leaves(node):
    if isinstance(node, LEAVES):
        yield node
    for c in children_of(node):
        yield from iter_leaves(c)


# -- the tick engine -----------------------------------------------------------

def _path_id(path: tuple) -> str:
    return "b" + "".join(f".{i}" for i in path)


class TickEngine:
    def __init__(self, program: BtProgram):
        self.program = program
        self.memory: dict[tuple, int] = {}
        self.once: dict[tuple, Status] = {}
        self.leaves: dict[tuple, tuple] = {}  # path -> (leaf, instance)
        self.trace = TraceLog()
        self._seq = 0
        self._statuses: dict[tuple, Status] = {}
        self._now = 0

    def _event(self, kind, path, name, **detail):
        parent = _path_id(path[:-1]) if path else None
        self.trace.append(TraceEvent(self._now, self._seq, kind, _path_id(path), parent,
                                     name, detail))
        self._seq += 1

    def tick(self, t: int) -> Status:
        self._now = t
        self._statuses = {}
        status = self._tick(self.program.root, (), t)
        self._halt_inactive()
        return status

    def running_leaves(self) -> list[str]:
        return [leaf_label(leaf) for _, (leaf, _) in sorted(self.leaves.items())]

    def _halt_inactive(self) -> None:
        st = self._statuses

        def active(path):
            return all(st.get(path[:i]) == Status.RUNNING for i in range(len(path) + 1))

        for path in sorted(self.leaves):
            if not active(path):
                leaf, inst = self.leaves.pop(path)
                inst.halt()
                self._event("cancel", path, leaf_label(leaf))
        for path in [p for p in self.memory if not active(p)]:
            del self.memory[path]

    def _tick(self, node, path, t) -> Status:
        status = self._dispatch(node, path, t)
        self._statuses[path] = status
        return status

    def _dispatch(self, node, path, t) -> Status:
        S, F, R = Status.SUCCESS, Status.FAILURE, Status.RUNNING
        if isinstance(node, ActionLeaf):
            entry = self.leaves.get(path)
            if entry is None:
                inst = self.program.actions[node.name](*node.args)
                entry = self.leaves[path] = (node, inst)
                self._event("start", path, leaf_label(node), leaf=True)
            status = entry[1].tick(t)
            if status is not R:
                del self.leaves[path]
                self._event("complete" if status is S else "fail", path, leaf_label(node))
            return status
        if isinstance(node, ConditionLeaf):
            value = self.program.conditions[node.name](t, *node.args)
            if not isinstance(value, bool):
                raise ConfigError(f"condition {leaf_label(node)} must return a bool "
                                  f"within the tick, got {value!r}")
            self._event("test", path, leaf_label(node), value=value)
            return S if value else F
        if isinstance(node, (Sequence, Fallback)):
            stop = F if isinstance(node, Sequence) else S
            for i, child in enumerate(node.children):
                status = self._tick(child, path + (i,), t)
                if status is R or status is stop:
                    return status
            return S if isinstance(node, Sequence) else F
        if isinstance(node, (SequenceMem, FallbackMem)):
            stop = F if isinstance(node, SequenceMem) else S
            start = self.memory.get(path, 0)
            for i in range(start, len(node.children)):
                status = self._tick(node.children[i], path + (i,), t)
                if status is R:
                    self.memory[path] = i
                    return R
                if status is stop:
                    self.memory.pop(path, None)
                    return status
            self.memory.pop(path, None)
            return S if isinstance(node, SequenceMem) else F
        if isinstance(node, Parallel):
            results = [self._tick(c, path + (i,), t) for i, c in enumerate(node.children)]
            n = len(results)
            if results.count(S) >= node.m:
                return S
            if results.count(F) >= n - node.m + 1:
                return F
            return R
        if isinstance(node, Inverter):
            status = self._tick(node.child, path + (0,), t)
            return {S: F, F: S, R: R}[status]
        if isinstance(node, (Repeat, RetryUntilSuccessful)):
            goal, stop = (S, F) if isinstance(node, Repeat) else (F, S)
            status = self._tick(node.child, path + (0,), t)
            if status is R:
                self.memory.setdefault(path, 0)
                return R
            if status is stop:
                self.memory.pop(path, None)
                return stop
            count = self.memory.get(path, 0) + 1
            if count >= node.n:
                self.memory.pop(path, None)
                return goal
            self.memory[path] = count
            return R
        if isinstance(node, RunOnce):
            if path in self.once:
                return self.once[path]
            status = self._tick(node.child, path + (0,), t)
            if status is not R:
                self.once[path] = status
            return status
        raise ConfigError(f"unknown node {node!r}")


@dataclass
class TickRun:
    history: list
    trace: TraceLog
    running: list
    outcome: object  # Status, or None when the budget ran out

    @property
    def ticks(self) -> int:
        return len(self.history)

    @property
    def exhausted(self) -> bool:
        return self.outcome is None


def run_ticked(program: BtProgram, max_ticks: int) -> TickRun:
    """Tick from the root every tick until it stops Running or the budget runs out."""
    if max_ticks < 1:
        raise ValueError("max_ticks must be > 0")
    engine = TickEngine(program)
    history, running = [], []
    for t in range(max_ticks):
        status = engine.tick(t)
        history.append(status)
        running.append(engine.running_leaves())
        if status is not Status.RUNNING:
            return TickRun(history, engine.trace, running, status)
    return TickRun(history, engine.trace, running, None)


class TickedTree(Behavior):
    """Behavior that ticks a classical tree once per virtual tick."""

    name = "tickedTree"

    def __init__(self, program: BtProgram):
        self.program = program

    @property
    def actuating(self) -> bool:
        return True

    def describe(self):
        return f"ticked({render(self.program.root)})"

    async def execute(self, ctx):
        engine = TickEngine(self.program)
        while True:
            status = engine.tick(ctx.now)
            if status is Status.SUCCESS:
                return None
            if status is Status.FAILURE:
                raise ctx.failure(ErrorKind.ACTION_FAILED, "tree returned Failure")
            await ctx.sleep(1, phase=PHASE_STEP)


# -- reactive selection form -----------------------------------------------------

def _check_core(node) -> None:
    if isinstance(node, LEAVES):
        return
    if not isinstance(node, (Sequence, Fallback)):
        raise NotApplicable(f"{type(node).__name__} is outside the reactive "
                            f"Sequence/Fallback vocabulary: {render(node)}")
    for c in node.children:
        _check_core(c)


def _violation(node):
    """``None`` if ``node`` is in form, else ``(subtree, reason)``."""
    if isinstance(node, LEAVES):
        return None
    if len(node.children) != 2:
        return node, f"{type(node).__name__} must have exactly 2 children"
    left, right = node.children
    if isinstance(node, Fallback):
        if not isinstance(left, ConditionLeaf):
            return node, "a Fallback must test a Condition on its left"
        return _violation(right)
    # Sequence
    if isinstance(left, ConditionLeaf):
        return _violation(right)
    if isinstance(left, Fallback) and len(left.children) == 2 \
            and isinstance(left.children[0], ConditionLeaf):
        return _violation(left.children[1]) or _violation(right)
    return node, "a Sequence must start with a Condition or a (Condition ? ...) guard"


def is_reactive_selection_form(node) -> bool:
    """True iff the tree is nested ``(cond ? L) -> R`` shapes over leaves.

    Also accepts ``cond -> R`` and ``cond ? L`` (the degenerate guards
    produced by backchaining).  Raises :class:`NotApplicable` for memory
    nodes, Parallel and decorators.
    """
    _check_core(node)
    return _violation(node) is None


def _default_leaf(leaf) -> Behavior:
    return Action(leaf.name, leaf.args, actuating=isinstance(leaf, ActionLeaf))


def to_rselect(node, bind_leaf: Callable[[object], Behavior] = _default_leaf) -> Behavior:
    """Translate a tree in reactive selection form into rSelect combinators.

    ``(c ? L) -> R`` becomes ``rSelect(c, R', L')``; ``c -> R`` becomes
    ``rSelect(c, R', fail)``; ``c ? L`` becomes ``rSelect(c, pure(), L')``;
    a bare condition succeeds iff it reads true.
    """
    _check_core(node)
    bad = _violation(node)
    if bad is not None:
        raise NotInForm(*bad)
    return _translate(node, bind_leaf)


def _translate(node, bind):
    if isinstance(node, ActionLeaf):
        return bind(node)
    if isinstance(node, ConditionLeaf):
        return holds(bind(node))
    left, right = node.children
    if isinstance(node, Fallback):
        return rselect(bind(left), pure(), _translate(right, bind))
    if isinstance(left, ConditionLeaf):
        return rselect(bind(left), _translate(right, bind),
                       throw_failed(ErrorKind.CONDITION_FAILED, f"{leaf_label(left)} is false"))
    cond, inner = left.children
    return rselect(bind(cond), _translate(right, bind), _translate(inner, bind))


def _source(node) -> str:
    if isinstance(node, ActionLeaf):
        return leaf_label(node)
    if isinstance(node, ConditionLeaf):
        return f"if {leaf_label(node)} then pure() else fail"
    left, right = node.children
    if isinstance(node, Fallback):
        return f"rSelect({leaf_label(left)}, pure(), {_source(right)})"
    if isinstance(left, ConditionLeaf):
        return f"rSelect({leaf_label(left)}, {_source(right)}, fail)"
    cond, inner = left.children
    return f"rSelect({leaf_label(cond)}, {_source(right)}, {_source(inner)})"


def to_rselect_source(node, name: str = "bt") -> str:
    """DSL text of the translation, e.g. ``bt = rSelect(c1, a2, a1)``."""
    _check_core(node)
    bad = _violation(node)
    if bad is not None:
        raise NotInForm(*bad)
    return f"{name} = {_source(node)}\n"


# -- rewrites and lint -----------------------------------------------------------

def backchain(action, pre: ConditionLeaf, post: ConditionLeaf):
    """``post ? (pre -> action)``: skip when done, fail when not applicable."""
    return Fallback((post, Sequence((pre, action))))


def explicit_door_subtree(door: str = "door", goal: str = "insideRoomAndDoorClosed",
                          then_do: str = "doTask"):
    """Door subtree made reactive with explicit success conditions.

    ``(goal ? ((insideRoom ? ((isOpen ? open) -> passThrough)) -> close)) -> then_do``
    """
    args = (door,)
    through = Sequence((Fallback((ConditionLeaf("isOpen", args), ActionLeaf("open", args))),
                        ActionLeaf("passThrough", args)))
    inside = Sequence((Fallback((ConditionLeaf("insideRoom"), through)),
                       ActionLeaf("close", args)))
    return Sequence((Fallback((ConditionLeaf(goal), inside)), ActionLeaf(then_do)))


def memory_to_reactive(done: ConditionLeaf, first, second):
    """Rewrite ``first ->* second`` as ``(done ? first) -> second``.

    The result is in reactive selection form but only means what the memory
    version meant if ``done`` is maintained by something other than the tree.
    """
    warnings.warn(
        f"{leaf_label(done)} must become true exactly when {render(first)} has finished; "
        "if it can only be observed by running that action the rewrite is circular",
        CircularConditionWarning, stacklevel=2)
    return Sequence((Fallback((done, first)), second))


def can_run(node) -> bool:
    """Whether ``node`` can ever return Running."""
    if isinstance(node, ActionLeaf):
        return True
    if isinstance(node, ConditionLeaf):
        return False
    if isinstance(node, (Repeat, RetryUntilSuccessful)):
        return True
    return any(can_run(c) for c in children_of(node))


def _guarded(node) -> bool:
    return isinstance(node, ConditionLeaf) or (
        isinstance(node, Fallback) and isinstance(node.children[0], ConditionLeaf))


def progress_hazards(node, path: tuple = ()) -> list[str]:
    """Places where a reactive node re-ticks a Running child ahead of its successors.

    Such a child restarts every tick while a later child runs, so the later
    child is halted and the tree never makes progress.
    """
    found = []
    if isinstance(node, (Sequence, Fallback)):
        for i, child in enumerate(node.children[:-1]):
            if can_run(child) and not _guarded(child):
                kind = type(node).__name__
                found.append(f"{_path_id(path + (i,))}: reactive {kind} re-ticks "
                             f"{render(child)}, which can return Running, before "
                             f"{render(node.children[i + 1])}")
    for i, child in enumerate(children_of(node)):
        found.extend(progress_hazards(child, path + (i,)))
    return found
