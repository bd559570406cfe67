"""Structured execution trace."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

TERMINAL_KINDS = ("complete", "fail", "cancel")
EVENT_KINDS = ("start", "complete", "fail", "cancel", "switch", "world", "test")


def jsonable(value: Any) -> Any:
    """Coerce a behavior result into something json can encode stably."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in sorted(value.items())}
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    return repr(value)


@dataclass(frozen=True)
class TraceEvent:
    t: int
    seq: int
    kind: str
    node: str
    parent: str | None
    name: str
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        record = {
            "t": self.t,
            "seq": self.seq,
            "kind": self.kind,
            "node": self.node,
            "parent": self.parent,
            "name": self.name,
            "detail": jsonable(self.detail),
        }
        return json.dumps(record, separators=(",", ":"))


class TraceLog:
    """Append-only list of :class:`TraceEvent` with query helpers."""

    def __init__(self, events: Iterable[TraceEvent] = ()):
        self.events: list[TraceEvent] = list(events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "TraceLog":
        events = []
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            events.append(TraceEvent(rec["t"], rec["seq"], rec["kind"], rec["node"],
                                     rec["parent"], rec["name"], rec["detail"]))
        return cls(events)

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    def starts(self, name: str | None = None) -> list[TraceEvent]:
        return [e for e in self.events
                if e.kind == "start" and (name is None or e.name == name)]

    def switches(self, node: str | None = None) -> list[TraceEvent]:
        return [e for e in self.events
                if e.kind == "switch" and (node is None or e.node == node)]

    def parents(self) -> dict[str, str | None]:
        return {e.node: e.parent for e in self.events if e.kind == "start"}

    def names(self) -> dict[str, str]:
        return {e.node: e.name for e in self.events if e.kind == "start"}

    def terminal(self, node: str) -> TraceEvent | None:
        for e in self.events:
            if e.node == node and e.kind in TERMINAL_KINDS:
                return e
        return None

    def ancestors(self, node: str) -> list[str]:
        parents = self.parents()
        chain = []
        current = parents.get(node)
        while current is not None:
            chain.append(current)
            current = parents.get(current)
        return chain

    def world_effects(self) -> list[tuple]:
        """World-affecting events without node ids, for trace equivalence checks."""
        return [(e.t, e.name, json.dumps(jsonable(e.detail), sort_keys=True))
                for e in self.events if e.kind == "world"]

    def invocation_counts(self, leaves_only: bool = True) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.events:
            if e.kind == "start" and (not leaves_only or e.detail.get("leaf")):
                counts[e.name] = counts.get(e.name, 0) + 1
        return counts

    def live_at(self, t: int, leaves_only: bool = True) -> list[str]:
        """Names of executions still live after all events of tick ``t``."""
        live: dict[str, str] = {}
        for e in self.events:
            if e.t > t:
                break
            if e.kind == "start" and (not leaves_only or e.detail.get("leaf")):
                live[e.node] = e.name
            elif e.kind in TERMINAL_KINDS:
                live.pop(e.node, None)
        return list(live.values())
