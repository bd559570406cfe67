"""Deterministic door/room/battery world with scripted fault injection.

The world is the executor's environment.  At the start of every tick the
executor calls :meth:`World.on_tick`, which first applies battery drain for
the previous tick and then any injections scheduled for this tick.  Actions
are coroutines that mutate the world only from inside their own scheduled
steps, so cancelling an action stops its effects immediately.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError, ErrorKind

NULL, BOOL, INT, DOOR, BOX = "Null", "Bool", "Int", "Door", "Box"


@dataclass(frozen=True)
class ActionSig:
    params: tuple
    returns: str
    actuating: bool
    drains: bool


# name -> signature; the DSL type checker and the elaborator read this table
SIGNATURES: dict[str, ActionSig] = {
    "open": ActionSig((DOOR,), NULL, True, True),
    "passThrough": ActionSig((DOOR,), NULL, True, True),
    "close": ActionSig((DOOR,), NULL, True, True),
    "smash": ActionSig((DOOR,), NULL, True, True),
    "doTask": ActionSig((), NULL, True, True),
    "recharge": ActionSig((), NULL, True, False),
    "moveTo": ActionSig((BOX,), NULL, True, True),
    "findDoors": ActionSig((), f"[{DOOR}]", False, False),
    "findBox": ActionSig((), BOX, False, False),
    "batteryLevel": ActionSig((), INT, False, False),
    "isOpen": ActionSig((DOOR,), BOOL, False, False),
    "doorClosed": ActionSig((DOOR,), BOOL, False, False),
    "insideRoom": ActionSig((), BOOL, False, False),
}

# sensor ids accepted by failSensor, mapped to the sensing actions they break
SENSORS = {
    "battery": ("batteryLevel",),
    "doors": ("findDoors",),
    "box": ("findBox",),
    "door": ("isOpen", "doorClosed"),
    "room": ("insideRoom",),
}
for _op, _sig in SIGNATURES.items():
    if not _sig.actuating:
        SENSORS.setdefault(_op, (_op,))

INJECTION_EFFECTS = ("lockDoor", "closeDoor", "teleportRobot", "failSensor", "setBattery")


@dataclass
class DoorState:
    open_fraction: float = 0.0
    locked: bool = False


@dataclass
class RobotState:
    room: str = "outside"
    position: int = 0
    carrying: str | None = None


@dataclass
class BatteryState:
    level: int = 100
    drain_per_tick: int = 1
    recharge_per_tick: int = 5


@dataclass
class TaskState:
    progress: int = 0
    required: int = 10


@dataclass
class WorldConfig:
    doors: dict = field(default_factory=lambda: {"frontDoor": {}, "backDoor": {}})
    rooms: tuple = ("outside", "room")
    task_room: str = "room"
    robot_room: str = "outside"
    robot_position: int = 0
    battery: int = 100
    drain_per_tick: int = 1
    recharge_per_tick: int = 5
    task_required: int = 10
    open_ticks: int = 3
    pass_ticks: int = 4
    close_ticks: int = 2
    smash_ticks: int = 3
    theta_pass: float = 0.8
    inside_advance: int = 2
    boxes: dict = field(default_factory=lambda: {"box17": 5})
    # list of bools, {seed: list}, or a success probability
    smash_outcomes: Any = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict | None) -> "WorldConfig":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown world settings: {', '.join(sorted(unknown))}")
        if "doors" in data:
            doors = data["doors"]
            if isinstance(doors, list):
                data["doors"] = {d: {} for d in doors}
        if "rooms" in data:
            data["rooms"] = tuple(data["rooms"])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0 <= self.battery <= 100:
            raise ConfigError("battery must be within 0..100")
        for name in ("open_ticks", "pass_ticks", "close_ticks", "smash_ticks", "task_required"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 < self.theta_pass <= 1:
            raise ConfigError("theta_pass must be within (0, 1]")
        if self.task_room not in self.rooms or self.robot_room not in self.rooms:
            raise ConfigError("task_room and robot_room must be listed in rooms")
        for door, door_cfg in self.doors.items():
            extra = set(door_cfg or {}) - {"open_fraction", "locked"}
            if extra:
                raise ConfigError(f"door {door}: unknown fields {sorted(extra)}")


@dataclass(frozen=True)
class Injection:
    time: int
    effect: str
    arg: Any = None

    @classmethod
    def from_dict(cls, data: dict) -> "Injection":
        if not isinstance(data, dict) or "effect" not in data:
            raise ConfigError(f"injection needs 't' and 'effect': {data!r}")
        return cls(int(data.get("t", data.get("time", 0))), data["effect"], data.get("arg"))


def _snap(fraction: float) -> float:
    """Clamp to [0, 1] and round, absorbing the drift of repeated 1/n steps."""
    if fraction > 1.0 - 1e-5:
        return 1.0
    if fraction < 1e-5:
        return 0.0
    return round(fraction, 6)


def _smash_script(script, seed: int) -> list[bool]:
    if isinstance(script, bool):
        return [script] * 64
    if isinstance(script, (int, float)):
        rng = random.Random(seed)
        return [rng.random() < float(script) for _ in range(64)]
    if isinstance(script, dict):
        chosen = script.get(seed, script.get(str(seed), script.get("default", [])))
        return _smash_script(chosen, seed)
    return [bool(x) for x in script]


class World:
    """Mutable simulation state plus the standard action library."""

    def __init__(self, config: WorldConfig | None = None, injections=(), seed: int = 0):
        self.config = config or WorldConfig()
        self.config.validate()
        self.seed = seed
        c = self.config
        self.doors = {d: DoorState(float((s or {}).get("open_fraction", 0.0)),
                                   bool((s or {}).get("locked", False)))
                      for d, s in c.doors.items()}
        self.robot = RobotState(c.robot_room, c.robot_position)
        self.battery = BatteryState(c.battery, c.drain_per_tick, c.recharge_per_tick)
        self.task = TaskState(0, c.task_required)
        self.boxes = dict(c.boxes)
        self.clock = 0
        self.failed_sensors: set[str] = set()
        self.smash_script = _smash_script(c.smash_outcomes, seed)
        self.injections = sorted((i if isinstance(i, Injection) else Injection.from_dict(i)
                                  for i in injections), key=lambda i: i.time)
        for inj in self.injections:
            self._validate_injection(inj)
        self._executor = None

    # -- injections ----------------------------------------------------------
    def _validate_injection(self, inj: Injection) -> None:
        if inj.effect not in INJECTION_EFFECTS:
            raise ConfigError(f"unknown injection effect {inj.effect!r}")
        if inj.time < 0:
            raise ConfigError("injection time must be >= 0")
        if inj.effect in ("lockDoor", "closeDoor") and inj.arg not in self.doors:
            raise ConfigError(f"{inj.effect}: unknown door {inj.arg!r}")
        if inj.effect == "teleportRobot" and inj.arg not in self.config.rooms:
            raise ConfigError(f"teleportRobot: unknown room {inj.arg!r}")
        if inj.effect == "failSensor" and inj.arg not in SENSORS:
            raise ConfigError(f"failSensor: unknown sensor {inj.arg!r}")
        if inj.effect == "setBattery":
            if not isinstance(inj.arg, int) or not 0 <= inj.arg <= 100:
                raise ConfigError("setBattery needs an integer level within 0..100")

    def _apply(self, inj: Injection) -> None:
        if inj.effect == "lockDoor":
            self.doors[inj.arg].locked = True
        elif inj.effect == "closeDoor":
            self.doors[inj.arg].open_fraction = 0.0
        elif inj.effect == "teleportRobot":
            self.robot.room = inj.arg
        elif inj.effect == "failSensor":
            self.failed_sensors.update(SENSORS[inj.arg])
        elif inj.effect == "setBattery":
            self.battery.level = inj.arg

    # -- executor hook -------------------------------------------------------
    def on_tick(self, t: int, executor) -> None:
        self._executor = executor
        self.clock = t
        if t > 0 and any(getattr(n.behavior, "drains", False) for n in executor.live_leaves()):
            b = self.battery
            b.level = max(0, b.level - b.drain_per_tick)
            executor.record("world", "physics", None, "drain", {"battery": b.level})
        for inj in self.injections:
            if inj.time == t:
                self._apply(inj)
                executor.record("world", "inject", None, inj.effect, {"arg": inj.arg})

    # -- action library ------------------------------------------------------
    def action_body(self, op: str):
        if op not in SIGNATURES:
            raise ConfigError(f"world has no action {op!r}")
        return getattr(self, f"_act_{op}")

    def snapshot(self) -> dict:
        return {
            "clock": self.clock,
            "robot": {"room": self.robot.room, "position": self.robot.position,
                      "carrying": self.robot.carrying},
            "doors": {d: {"open_fraction": s.open_fraction, "locked": s.locked}
                      for d, s in sorted(self.doors.items())},
            "battery": self.battery.level,
            "task": {"progress": self.task.progress, "required": self.task.required},
            "boxes": dict(sorted(self.boxes.items())),
        }

    def _door(self, ctx, door) -> DoorState:
        if door not in self.doors:
            raise ctx.failure(ErrorKind.ACTION_FAILED, f"no such door {door!r}")
        return self.doors[door]

    def _sense(self, ctx, op: str) -> None:
        if op in self.failed_sensors:
            raise ctx.failure(ErrorKind.CONDITION_FAILED, f"sensor for {op} is broken")

    def _powered(self, ctx) -> None:
        if self.battery.level <= 0:
            raise ctx.failure(ErrorKind.ACTION_FAILED, "battery depleted")

    async def _act_open(self, ctx, door):
        d = self._door(ctx, door)
        step = 1.0 / self.config.open_ticks
        while d.open_fraction < 1.0:
            if d.locked:
                raise ctx.failure(ErrorKind.ACTION_FAILED, f"{door} is locked")
            self._powered(ctx)
            await ctx.sleep(1)
            if d.locked:
                raise ctx.failure(ErrorKind.ACTION_FAILED, f"{door} is locked")
            d.open_fraction = _snap(d.open_fraction + step)
            ctx.emit("world", door=door, open_fraction=d.open_fraction)
        return None

    async def _act_passThrough(self, ctx, door):
        d = self._door(ctx, door)
        theta = self.config.theta_pass
        if d.open_fraction < theta:
            raise ctx.failure(ErrorKind.ACTION_FAILED, f"{door} is not open enough")
        rooms = self.config.rooms
        target = rooms[1] if self.robot.room == rooms[0] else rooms[0]
        approach = self.config.pass_ticks
        for i in range(1, approach + self.config.inside_advance + 1):
            self._powered(ctx)
            await ctx.sleep(1)
            if i <= approach and d.open_fraction < theta:
                raise ctx.failure(ErrorKind.ACTION_FAILED, f"{door} closed while crossing")
            if i == approach:
                self.robot.room = target
                ctx.emit("world", door=door, room=target)
            else:
                ctx.emit("world", door=door, step=i)
        return None

    async def _act_close(self, ctx, door):
        d = self._door(ctx, door)
        step = 1.0 / self.config.close_ticks
        while d.open_fraction > 0.0:
            self._powered(ctx)
            await ctx.sleep(1)
            d.open_fraction = _snap(d.open_fraction - step)
            ctx.emit("world", door=door, open_fraction=d.open_fraction)
        return None

    async def _act_smash(self, ctx, door):
        d = self._door(ctx, door)
        for _ in range(self.config.smash_ticks):
            self._powered(ctx)
            await ctx.sleep(1)
        ok = self.smash_script.pop(0) if self.smash_script else True
        ctx.emit("world", door=door, smashed=ok)
        if not ok:
            raise ctx.failure(ErrorKind.ACTION_FAILED, f"could not smash {door}")
        d.locked = False
        d.open_fraction = 1.0
        return None

    async def _act_doTask(self, ctx):
        if self.robot.room != self.config.task_room:
            raise ctx.failure(ErrorKind.ACTION_FAILED,
                              f"task must be done in {self.config.task_room}")
        self.task.progress = 0
        while self.task.progress < self.task.required:
            self._powered(ctx)
            await ctx.sleep(1)
            if self.robot.room != self.config.task_room:
                raise ctx.failure(ErrorKind.ACTION_FAILED, "robot left the task room")
            self.task.progress += 1
            ctx.emit("world", task=self.task.progress)
        return None

    async def _act_recharge(self, ctx):
        b = self.battery
        while b.level < 100:
            await ctx.sleep(1)
            b.level = min(100, b.level + b.recharge_per_tick)
            ctx.emit("world", battery=b.level)
        return None

    async def _act_moveTo(self, ctx, box):
        if box not in self.boxes:
            raise ctx.failure(ErrorKind.ACTION_FAILED, f"no such box {box!r}")
        target = self.boxes[box]
        while self.robot.position != target:
            self._powered(ctx)
            await ctx.sleep(1)
            self.robot.position += 1 if target > self.robot.position else -1
            ctx.emit("world", position=self.robot.position)
        return None

    async def _act_findDoors(self, ctx):
        self._sense(ctx, "findDoors")
        return list(self.doors)

    async def _act_findBox(self, ctx):
        self._sense(ctx, "findBox")
        if not self.boxes:
            raise ctx.failure(ErrorKind.ACTION_FAILED, "no box in sight")
        return sorted(self.boxes)[0]

    async def _act_batteryLevel(self, ctx):
        self._sense(ctx, "batteryLevel")
        return self.battery.level

    async def _act_isOpen(self, ctx, door):
        self._sense(ctx, "isOpen")
        return self._door(ctx, door).open_fraction >= self.config.theta_pass

    async def _act_doorClosed(self, ctx, door):
        self._sense(ctx, "doorClosed")
        return self._door(ctx, door).open_fraction == 0.0

    async def _act_insideRoom(self, ctx):
        self._sense(ctx, "insideRoom")
        return self.robot.room == self.config.task_room


def standard_action(op: str, *args):
    """Leaf behavior for a standard world action, with its declared flags."""
    from .behavior import Action

    sig = SIGNATURES.get(op)
    if sig is None:
        raise ConfigError(f"unknown action {op!r}")
    if len(args) != len(sig.params):
        raise ConfigError(f"{op} takes {len(sig.params)} argument(s), got {len(args)}")
    return Action(op, args, actuating=sig.actuating, drains=sig.drains)


class _Library:
    """``actions.open("frontDoor")`` style access to :func:`standard_action`."""

    def __getattr__(self, op):
        if op not in SIGNATURES:
            raise AttributeError(op)
        return lambda *args: standard_action(op, *args)


actions = _Library()
