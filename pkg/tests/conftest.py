import pytest

from btlang.behavior import Action
from btlang.errors import ErrorKind

ACCEPTANCE_RESULTS = {}


def timed(name, ticks, value=None, fail=False, actuating=True):
    """Leaf that runs ``ticks`` ticks, emitting one world event per tick."""

    async def body(ctx):
        for i in range(ticks):
            await ctx.sleep(1)
            ctx.emit("world", step=i + 1)
        if fail:
            raise ctx.failure(ErrorKind.ACTION_FAILED, "scripted failure")
        return value

    return Action(name, (), body, actuating=actuating, drains=False)


def scripted(name, outcomes, ticks=1):
    """Leaf whose k-th invocation succeeds iff ``outcomes[k]`` (last entry repeats)."""
    calls = []

    async def body(ctx):
        k = len(calls)
        calls.append(ctx.now)
        for _ in range(ticks):
            await ctx.sleep(1)
            ctx.emit("world", call=k)
        if not outcomes[min(k, len(outcomes) - 1)]:
            raise ctx.failure(ErrorKind.ACTION_FAILED, f"scripted failure #{k}")
        return k

    return Action(name, (), body, actuating=True, drains=False)


def condition(name, values):
    """Non-actuating 0-tick condition reading ``values[now]`` (last value repeats)."""
    values = list(values)

    async def body(ctx):
        return values[min(ctx.now, len(values) - 1)]

    return Action(name, (), body, actuating=False)


def broken(name, kind=ErrorKind.CONDITION_FAILED):
    async def body(ctx):
        raise ctx.failure(kind, "broken sensor")

    return Action(name, (), body, actuating=False)


def forever(name):
    """Actuating leaf that never completes on its own."""

    async def body(ctx):
        while True:
            await ctx.sleep(1000)

    return Action(name, (), body, actuating=True, drains=False)


def record_acceptance(number, description, ok, detail=""):
    ACCEPTANCE_RESULTS[number] = (description, ok, detail)
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {number}] {status}: {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        description, ok, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"[criterion {number}] {status}: {description}{suffix}")


@pytest.fixture
def world():
    from btlang.sim import World

    return World()
