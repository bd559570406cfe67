"""Scenario files: a program, a world, scripted injections and run settings.

Example::

    program: programs/enter_room.bhv   # relative to this file
    entry: bt
    world:
      battery: 100
      doors: {frontDoor: {}, backDoor: {locked: true}}
    injections:
      - {t: 0, effect: lockDoor, arg: frontDoor}
    cfg: {seed: 0, max_ticks: 1000, test_poll_period: 1}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from . import dsl
from .elaborate import default_constants, elaborate
from .errors import ConfigError
from .executor import BudgetExhausted, ExecConfig, Executor, Failure, Success
from .sim import Injection, World, WorldConfig
from .trace import TraceLog, jsonable

EXIT_SUCCESS, EXIT_FAILURE, EXIT_BUDGET, EXIT_CONFIG, EXIT_NOT_IN_FORM = 0, 1, 2, 3, 4

_CFG_KEYS = {"seed", "max_ticks", "test_poll_period", "max_steps_per_tick"}


@dataclass
class Scenario:
    name: str
    program_path: Path
    program_text: str
    entry: str = "bt"
    world: WorldConfig = field(default_factory=WorldConfig)
    injections: list = field(default_factory=list)
    cfg: ExecConfig = field(default_factory=ExecConfig)

    def with_overrides(self, max_ticks=None, seed=None, poll=None) -> "Scenario":
        c = self.cfg
        cfg = ExecConfig(
            test_poll_period=c.test_poll_period if poll is None else poll,
            max_ticks=c.max_ticks if max_ticks is None else max_ticks,
            seed=c.seed if seed is None else seed,
            max_steps_per_tick=c.max_steps_per_tick,
        )
        return Scenario(self.name, self.program_path, self.program_text, self.entry,
                        self.world, list(self.injections), cfg)


def bundled_dir() -> Path:
    return Path(str(resources.files("btlang") / "scenarios"))


def bundled(name: str) -> Path:
    """Path of a bundled scenario, e.g. ``bundled("nominal")``."""
    path = bundled_dir() / (name if name.endswith(".yaml") else name + ".yaml")
    if not path.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return path


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed scenario: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario must be a mapping")
    unknown = set(data) - {"program", "entry", "world", "injections", "cfg", "description"}
    if unknown:
        raise ConfigError(f"{path}: unknown scenario keys: {', '.join(sorted(unknown))}")
    if "program" not in data:
        raise ConfigError(f"{path}: missing 'program'")
    program_path = (path.parent / data["program"]).resolve()
    try:
        text = program_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read program {data['program']}: {exc.strerror}") from exc
    world = WorldConfig.from_dict(data.get("world"))
    injections = [Injection.from_dict(i) for i in (data.get("injections") or [])]
    cfg_data = data.get("cfg") or {}
    bad = set(cfg_data) - _CFG_KEYS
    if bad:
        raise ConfigError(f"{path}: unknown cfg keys: {', '.join(sorted(bad))}")
    try:
        cfg = ExecConfig(**cfg_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return Scenario(path.stem, program_path, text, str(data.get("entry", "bt")),
                    world, injections, cfg)


@dataclass
class RunSummary:
    outcome: dict
    total_ticks: int
    switch_counts: dict
    action_invocation_counts: dict

    @classmethod
    def from_run(cls, outcome, trace: TraceLog, ticks: int) -> "RunSummary":
        if isinstance(outcome, Success):
            out = {"status": "success", "value": jsonable(outcome.value)}
        elif isinstance(outcome, Failure):
            out = {"status": "failure", "error": outcome.error.to_dict()}
        else:
            out = {"status": "budget-exhausted", "reason": outcome.reason}
        names = trace.names()
        switches: dict[str, dict] = {}
        for e in trace.switches():
            entry = switches.setdefault(e.node, {"name": names.get(e.node, e.name), "count": 0,
                                                 "transitions": {}})
            entry["count"] += 1
            key = f"{e.detail['from']}->{e.detail['to']}"
            entry["transitions"][key] = entry["transitions"].get(key, 0) + 1
        return cls(out, ticks, switches, dict(sorted(trace.invocation_counts().items())))

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "total_ticks": self.total_ticks,
                "switch_counts": self.switch_counts,
                "action_invocation_counts": self.action_invocation_counts}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @property
    def exit_code(self) -> int:
        return {"success": EXIT_SUCCESS, "failure": EXIT_FAILURE,
                "budget-exhausted": EXIT_BUDGET}[self.outcome["status"]]


@dataclass
class ScenarioRun:
    outcome: object
    trace: TraceLog
    world: World
    summary: RunSummary


def build(scenario: Scenario):
    """Parse, check and elaborate the scenario's program against its world."""
    ast = dsl.parse(scenario.program_text, str(scenario.program_path))
    consts = default_constants(tuple(scenario.world.doors), tuple(scenario.world.boxes))
    return elaborate(ast, scenario.entry, consts)


def run_scenario(scenario: Scenario) -> ScenarioRun:
    behavior = build(scenario)
    world = World(scenario.world, scenario.injections, scenario.cfg.seed)
    ex = Executor(world, scenario.cfg)
    result = ex.run(behavior)
    summary = RunSummary.from_run(result.outcome, result.trace, ex.time)
    return ScenarioRun(result.outcome, result.trace, world, summary)


def run_file(path, **overrides) -> ScenarioRun:
    return run_scenario(load_scenario(path).with_overrides(**overrides))


__all__ = ["Scenario", "RunSummary", "ScenarioRun", "load_scenario", "run_scenario",
           "run_file", "bundled", "bundled_dir", "BudgetExhausted"]
