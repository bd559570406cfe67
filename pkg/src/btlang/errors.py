"""Failure values and the exceptions that carry them."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class ErrorKind(str, enum.Enum):
    ACTION_FAILED = "ActionFailed"
    CONDITION_FAILED = "ConditionFailed"
    EXHAUSTED = "Exhausted"
    ACTUATION_IN_TEST_POSITION = "ActuationInTestPosition"


@dataclass(frozen=True)
class BehaviorError:
    """Structured reason for a behavior failure.

    ``time`` is the virtual tick at which the failure was raised.
    """

    kind: ErrorKind
    source: str
    message: str
    time: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "message": self.message,
            "source": self.source,
            "time": self.time,
        }


class BehaviorFailed(Exception):
    """Raised inside an execution to fail it; caught by ``fallback``."""

    def __init__(self, error: BehaviorError):
        super().__init__(f"{error.kind.value} in {error.source}: {error.message}")
        self.error = error


class ConfigError(Exception):
    """Malformed scenario, world, tree or program configuration."""
