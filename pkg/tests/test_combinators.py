from hypothesis import given, settings
from hypothesis import strategies as st

from btlang import (ExecConfig, Failure, Success, attempt, bind, both, fallback,
                    fallback_over, map_outcome, monitor, naive_monitor, parallel, pure,
                    rselect, run, then, throw_failed, unless, when)
from btlang.behavior import sleep
from btlang.errors import BehaviorError, ErrorKind
from btlang.sim import World, WorldConfig, actions

from conftest import broken, condition, scripted, timed


def end_time(trace):
    return trace[-1].t


def test_bind_passes_value_to_continuation():
    w = World()
    out, trace = run(bind(actions.findBox(), actions.moveTo), world=w)
    assert out == Success(None)
    assert [e.name for e in trace.starts() if e.detail.get("leaf")] == ["findBox", "moveTo(box17)"]
    assert w.robot.position == 5


def test_bind_short_circuits_on_failure():
    called = []
    out, _ = run(bind(throw_failed(), lambda v: called.append(v) or pure(v)))
    assert isinstance(out, Failure)
    assert called == []


def test_bind_pure_arithmetic():
    assert run(bind(pure(3), lambda x: pure(x + 1))).outcome == Success(4)


def test_then_runs_in_order():
    w = World()
    _, trace = run(then(actions.open("frontDoor"), actions.passThrough("frontDoor")), world=w)
    open_end = trace.terminal(trace.starts("open(frontDoor)")[0].node)
    pass_start = trace.starts("passThrough(frontDoor)")[0]
    assert open_end.kind == "complete"
    assert open_end.seq < pass_start.seq


def test_then_failure_and_value_discard():
    assert isinstance(run(then(throw_failed(), pure(1))).outcome, Failure)
    assert run(then(pure(99), pure(1))).outcome == Success(1)


def test_fallback_to_smash_on_locked_door():
    w = World(WorldConfig(doors={"backDoor": {"locked": True}}))
    b = fallback(actions.open("backDoor"), actions.smash("backDoor"))
    out, trace = run(b, world=w)
    assert out == Success(None)
    assert trace.terminal(trace.starts("open(backDoor)")[0].node).kind == "fail"
    assert len(trace.starts("smash(backDoor)")) == 1
    assert w.doors["backDoor"].open_fraction == 1.0


def test_fallback_first_success_skips_second():
    out, trace = run(fallback(pure(1), timed("never", 1)))
    assert out == Success(1)
    assert trace.starts("never") == []


def test_fallback_both_fail_yields_second_error():
    e1 = BehaviorError(ErrorKind.ACTION_FAILED, "a", "first")
    e2 = BehaviorError(ErrorKind.EXHAUSTED, "b", "second")
    out, _ = run(fallback(throw_failed(e1), throw_failed(e2)))
    assert out == Failure(e2)


def test_fallback_over_locked_front_door():
    w = World(WorldConfig(doors={"frontDoor": {"locked": True}, "backDoor": {}}))

    def opc(d):
        return then(actions.open(d), actions.passThrough(d), actions.close(d))

    out, trace = run(fallback_over(["frontDoor", "backDoor"], opc), world=w)
    assert out == Success(None)
    assert w.robot.room == "room"
    assert len(trace.starts("passThrough(backDoor)")) == 1
    assert trace.starts("passThrough(frontDoor)") == []


def test_fallback_over_empty_and_all_fail():
    out, _ = run(fallback_over([], lambda x: pure(x)))
    assert out.error.kind is ErrorKind.EXHAUSTED
    calls = []
    out, _ = run(fallback_over(["d1", "d2", "d3"], lambda d: calls.append(d) or throw_failed()))
    assert isinstance(out, Failure)
    assert calls == ["d1", "d2", "d3"]


def test_attempt_examples():
    out, trace = run(attempt(0, timed("task", 1)))
    assert out.error.kind is ErrorKind.EXHAUSTED
    assert trace.starts("task") == []

    out, trace = run(attempt(3, timed("task", 1, fail=True)))
    assert isinstance(out, Failure)
    assert len(trace.starts("task")) == 3

    out, trace = run(attempt(3, scripted("task", [False, True])))
    assert isinstance(out, Success)
    assert len(trace.starts("task")) == 2


def test_parallel_same_tick_failure_wins():
    for a, b in ((throw_failed(), timed("x", 0)), (timed("x", 0), throw_failed())):
        assert isinstance(run(parallel(a, b)).outcome, Failure)


def test_parallel_examples():
    out, trace = run(parallel(sleep(3), sleep(5)))
    assert out == Success(None) and end_time(trace) == 3
    assert [e.name for e in trace.of_kind("cancel")] == ["sleep(5)"]

    out, _ = run(parallel(pure(1), timed("x", 4)))
    assert out == Success(None)

    out, trace = run(parallel(throw_failed(), sleep(5)))
    assert isinstance(out, Failure)
    assert [e.name for e in trace.of_kind("cancel")] == ["sleep(5)"]


def test_both_examples():
    out, trace = run(both(sleep(3), sleep(5)))
    assert out == Success(None) and end_time(trace) == 5

    out, trace = run(both(pure(1), pure(2)))
    assert out == Success(None) and end_time(trace) == 0

    out, trace = run(both(then(sleep(2), throw_failed()), sleep(9)))
    assert isinstance(out, Failure) and end_time(trace) == 2
    assert [e.name for e in trace.of_kind("cancel")] == ["sleep(9)"]


def test_rselect_close_behind_on_teleport():
    # a human carries the robot inside at t=3 (switch to closing the door) and
    # back out at t=6 (switch back to passing through the half closed door)
    cfg = WorldConfig(doors={"frontDoor": {"open_fraction": 1.0}}, robot_room="outside",
                      close_ticks=10, theta_pass=0.1)
    w = World(cfg, injections=[{"t": 3, "effect": "teleportRobot", "arg": "room"},
                               {"t": 6, "effect": "teleportRobot", "arg": "outside"}])
    b = rselect(actions.insideRoom(), actions.close("frontDoor"),
                actions.passThrough("frontDoor"))
    out, trace = run(b, world=w)
    transitions = [(e.detail["from"], e.detail["to"]) for e in trace.switches()]
    assert transitions[:2] == [("right", "left"), ("left", "right")]
    closes = trace.starts("close(frontDoor)")
    assert trace.terminal(closes[0].node).kind == "cancel"
    assert out == Success(None)


def test_rselect_no_switch_when_constant():
    out, trace = run(rselect(condition("yes", [True]), pure(1), timed("other", 3)))
    assert out == Success(1)
    assert trace.switches() == [] and trace.starts("other") == []


def test_rselect_failing_test_is_condition_failed():
    out, trace = run(rselect(broken("sensor", ErrorKind.ACTION_FAILED), pure(1), pure(2)))
    assert out.error.kind is ErrorKind.CONDITION_FAILED


def test_rselect_non_boolean_reading_fails():
    out, _ = run(rselect(condition("num", [3]), pure(1), pure(2)))
    assert out.error.kind is ErrorKind.CONDITION_FAILED


def test_rselect_test_failure_mid_run_cancels_branch():
    async def body(ctx):
        if ctx.now >= 3:
            raise ctx.failure(ErrorKind.CONDITION_FAILED, "lost")
        return True

    from btlang.behavior import Action

    out, trace = run(rselect(Action("flaky", body=body, actuating=False), timed("L", 10),
                             pure(0)))
    assert out.error.kind is ErrorKind.CONDITION_FAILED
    assert trace.terminal(trace.starts("L")[0].node).kind == "cancel"
    assert all(e.t <= 3 for e in trace.of_kind("world"))


def test_rselect_branch_failure_propagates():
    out, _ = run(rselect(condition("c", [True]), timed("L", 2, fail=True), pure(0)))
    assert out.error.kind is ErrorKind.ACTION_FAILED


def test_rselect_poll_period():
    values = [True] * 3 + [False] * 20
    _, fast = run(rselect(condition("c", values), timed("L", 10), timed("R", 2)))
    _, slow = run(rselect(condition("c", values), timed("L", 10), timed("R", 2)),
                  cfg=ExecConfig(test_poll_period=4))
    assert fast.switches()[0].t == 3
    assert slow.switches()[0].t == 4


def test_monitor_no_recovery_when_test_false():
    out, trace = run(monitor(condition("low", [False]), timed("rec", 2), pure(5)))
    assert out == Success(5)
    assert trace.starts("rec") == []


def test_monitor_runs_recovery_to_completion():
    values = [False] * 3 + [True] * 2 + [False] * 40
    out, trace = run(monitor(condition("low", values), timed("rec", 4), timed("task", 6)))
    assert out == Success(None)
    rec = trace.starts("rec")[0]
    assert trace.terminal(rec.node).kind == "complete"
    assert trace.terminal(rec.node).t == rec.t + 4
    tasks = trace.starts("task")
    assert len(tasks) == 2 and tasks[1].t == rec.t + 4
    assert [(e.detail["from"], e.detail["to"]) for e in trace.switches()] == [
        ("task", "recovery"), ("recovery", "task")]


def test_monitor_completion_wins_same_tick_race():
    # task finishes at t=4 and the test turns true at t=4
    values = [False] * 4 + [True] * 10
    out, trace = run(monitor(condition("low", values), timed("rec", 1), timed("task", 4, value=7)))
    assert out == Success(7)
    assert trace.starts("rec") == []


def test_monitor_recovery_failure_propagates():
    out, _ = run(monitor(condition("low", [True]), timed("rec", 2, fail=True), pure(1)))
    assert out.error.kind is ErrorKind.ACTION_FAILED


def test_naive_monitor_never_succeeds():
    out, _ = run(naive_monitor(condition("low", [False]), timed("rec", 1), timed("task", 2)),
                 cfg=ExecConfig(max_ticks=200))
    assert not isinstance(out, (Success, Failure))


def test_when_and_unless():
    out, trace = run(unless(True, timed("open", 1)))
    assert out == Success(None) and trace.starts("open") == []
    _, trace = run(unless(False, timed("open", 1)))
    assert len(trace.starts("open")) == 1
    _, trace = run(when(True, timed("open", 1)))
    assert len(trace.starts("open")) == 1


def test_unless_open_skips_when_door_open():
    w = World(WorldConfig(doors={"frontDoor": {"open_fraction": 1.0}}))
    b = bind(actions.isOpen("frontDoor"), lambda o: unless(o, actions.open("frontDoor")))
    _, trace = run(b, world=w)
    assert trace.starts("open(frontDoor)") == []
    w = World()
    _, trace = run(b, world=w)
    assert len(trace.starts("open(frontDoor)")) == 1


def test_combinators_do_not_run_at_construction():
    calls = []
    b = bind(pure(1), lambda v: calls.append(v) or pure(v))
    assert calls == []
    run(b)
    run(b)
    assert calls == [1, 1]


# -- properties ----------------------------------------------------------------

bool_series = st.lists(st.booleans(), min_size=1, max_size=30)


@settings(max_examples=80, deadline=None)
@given(bool_series, st.integers(1, 8), st.integers(1, 8))
def test_rselect_mutual_exclusion(values, n, m):
    _, trace = run(rselect(condition("c", values), timed("L", n), timed("R", m)),
                   cfg=ExecConfig(max_ticks=60))
    for t in range(end_time(trace) + 1):
        live = trace.live_at(t)
        assert not ("L" in live and "R" in live)
    by_tick = {}
    for e in trace.of_kind("world"):
        by_tick.setdefault(e.t, set()).add(e.name)
    assert all(len(names) == 1 for names in by_tick.values())


@settings(max_examples=80, deadline=None)
@given(bool_series, st.integers(1, 8), st.integers(1, 8))
def test_rselect_symmetry(values, n, m):
    left, right = timed("L", n), timed("R", m)
    a = run(rselect(condition("c", values), left, right), cfg=ExecConfig(max_ticks=60))
    neg = map_outcome(condition("c", values), lambda v: not v, "not")
    b = run(rselect(neg, right, left), cfg=ExecConfig(max_ticks=60))
    assert a.trace.world_effects() == b.trace.world_effects()
    assert a.outcome == b.outcome


@settings(max_examples=80, deadline=None)
@given(bool_series, st.integers(1, 6), st.integers(1, 8))
def test_monitor_one_sidedness(values, r, n):
    out, trace = run(monitor(condition("low", values), timed("rec", r), timed("task", n)),
                     cfg=ExecConfig(max_ticks=80))
    mon = trace[0].node
    for start in trace.starts("rec"):
        end = trace.terminal(start.node)
        inside = [e for e in trace if start.seq < e.seq < end.seq]
        assert not [e for e in inside if e.kind == "test" and e.node == mon]
        assert not [e for e in inside if e.kind == "switch"]
        assert not [e for e in inside if e.kind == "world" and e.name == "task"]
    # every interruption starts exactly one recovery run
    to_recovery = [e for e in trace.switches() if e.detail["to"] == "recovery"]
    assert len(to_recovery) <= len(trace.starts("rec"))


@settings(max_examples=80, deadline=None)
@given(bool_series, st.integers(1, 8))
def test_monitor_success_matches_task(values, n):
    out, trace = run(monitor(condition("low", values), timed("rec", 2), timed("task", n, value=n)),
                     cfg=ExecConfig(max_ticks=100))
    if isinstance(out, Success):
        last = trace.starts("task")[-1]
        assert out.value == n
        assert trace.terminal(last.node).kind == "complete"


@st.composite
def small_behaviors(draw):
    kind = draw(st.sampled_from(["timed", "fail", "pure"]))
    if kind == "timed":
        return timed(draw(st.sampled_from("xyz")), draw(st.integers(0, 4)),
                     fail=draw(st.booleans()))
    if kind == "fail":
        return throw_failed()
    return pure(draw(st.integers(0, 3)))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 5), small_behaviors())
def test_fallback_pure_law(v, b):
    a = run(fallback(pure(v), b))
    assert a.outcome == Success(v)
    assert a.trace.world_effects() == []


@settings(max_examples=80, deadline=None)
@given(small_behaviors())
def test_fallback_throw_law(b):
    a = run(fallback(throw_failed(), b))
    c = run(b)
    assert a.trace.world_effects() == c.trace.world_effects()
    assert type(a.outcome) is type(c.outcome)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 6), st.lists(st.booleans(), min_size=1, max_size=8))
def test_attempt_invocation_bound(n, outcomes):
    out, trace = run(attempt(n, scripted("task", outcomes)))
    count = len(trace.starts("task"))
    assert count <= n
    padded = outcomes + [outcomes[-1]] * n
    all_fail = not any(padded[:n])
    assert (count == n) == (all_fail or (n > 0 and padded[n - 1] and not any(padded[:n - 1])))
    assert isinstance(out, Success) == (not all_fail)


@settings(max_examples=80, deadline=None)
@given(small_behaviors(), small_behaviors())
def test_parallel_and_both_commute(a, b):
    for comb in (parallel, both):
        r1 = run(comb(a, b))
        r2 = run(comb(b, a))
        assert type(r1.outcome) is type(r2.outcome)
        assert end_time(r1.trace) == end_time(r2.trace)
