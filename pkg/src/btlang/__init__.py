"""Re-runnable asynchronous behaviors with reactive composition."""

from .behavior import Action, Behavior, action, pure, sleep, throw_failed
from .combinators import (attempt, bind, both, fallback, fallback_over, holds, lazy,
                          map_outcome, monitor, naive_monitor, parallel, rselect, then,
                          unless, when)
from .errors import BehaviorError, BehaviorFailed, ConfigError, ErrorKind
from .executor import BudgetExhausted, ExecConfig, Executor, Failure, RunResult, Success, run
from .trace import TraceEvent, TraceLog

__all__ = [
    "Action", "Behavior", "action", "pure", "sleep", "throw_failed",
    "attempt", "bind", "both", "fallback", "fallback_over", "holds", "lazy", "map_outcome",
    "monitor", "naive_monitor", "parallel", "rselect", "then", "unless", "when",
    "BehaviorError", "BehaviorFailed", "ConfigError", "ErrorKind",
    "BudgetExhausted", "ExecConfig", "Executor", "Failure", "RunResult", "Success", "run",
    "TraceEvent", "TraceLog",
]
