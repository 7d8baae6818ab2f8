"""Director tests: schedule building, boundary carry, publish cadence,
operator commands, determinism."""

import pytest

from cancoach.coach import ConstantTimeGap, FeedbackType, VelocityMatching
from cancoach.director import (
    Director,
    ModeCommand,
    build_schedule,
    default_study_segments,
)
from cancoach.errors import ScheduleError


def _constant(label="c", set_point=2.25, feedback="coached", duration=120.0):
    return {
        "label": label,
        "objective": "constant_time_gap",
        "set_point": set_point,
        "feedback": feedback,
        "duration": duration,
    }


# ---------------------------------------------------------------- building


def test_build_single_segment():
    segs = build_schedule([_constant(duration=360.0)])
    assert len(segs) == 1
    assert segs[0].objective == ConstantTimeGap(2.25)
    assert segs[0].feedback is FeedbackType.COACHED
    assert segs[0].duration == 360.0


def test_build_dynamic_expands_to_subsegments():
    segs = build_schedule(
        [{"label": "dyn", "objective": "dynamic_time_gap", "feedback": "coached", "duration": 180.0}]
    )
    assert [s.duration for s in segs] == [60.0, 60.0, 60.0]
    assert [s.objective.set_point for s in segs] == [2.25, 1.8, 2.25]
    assert all(s.label == "dyn" for s in segs)


def test_build_dynamic_truncates_last_subsegment():
    segs = build_schedule(
        [{"label": "dyn", "objective": "dynamic_time_gap", "feedback": "coached", "duration": 150.0}]
    )
    assert [s.duration for s in segs] == [60.0, 60.0, 30.0]


def test_build_velocity_matching_has_no_set_point():
    segs = build_schedule(
        [{"label": "vm", "objective": "velocity_matching", "feedback": "coached", "duration": 60.0}]
    )
    assert isinstance(segs[0].objective, VelocityMatching)


@pytest.mark.parametrize(
    "bad",
    [
        [],
        [_constant(duration=0.0)],
        [_constant(duration=-5.0)],
        [{"objective": "warp_drive", "feedback": "coached", "duration": 10}],
        [{"objective": "constant_time_gap", "feedback": "psychic", "duration": 10}],
        [{"objective": "velocity_matching", "feedback": "ghost", "duration": 10}],
    ],
)
def test_build_rejects_bad_configs(bad):
    with pytest.raises(ScheduleError):
        build_schedule(bad)


def test_default_study_layout():
    segs = build_schedule(default_study_segments())
    # 6 plain segments + two 360 s dynamic blocks of six 60 s sub-segments
    assert len(segs) == 18
    assert sum(s.duration for s in segs) == pytest.approx(8 * 360.0)
    labels = [s.label for s in segs]
    assert labels[0] == "normal_driving"
    assert labels.count("dynamic_coached") == 6


# ------------------------------------------------------------------- tick


def test_tick_no_transition_mid_segment():
    d = Director(build_schedule([_constant(duration=120.0)]))
    assert d.tick(0.05) is None
    assert d.elapsed_in_segment == pytest.approx(0.05)


def test_tick_carries_overshoot_into_next_segment():
    d = Director(build_schedule([_constant("a", duration=120.0), _constant("b", duration=60.0)]))
    d.elapsed_in_segment = 119.9
    d.total_elapsed = 119.9
    event = d.tick(0.2)
    assert event is not None and event.kind == "advance"
    assert d.segment_index == 1
    assert d.elapsed_in_segment == pytest.approx(0.1)


def test_tick_completion_event_fires_once():
    d = Director(build_schedule([_constant(duration=1.0)]))
    events = [d.tick(0.05) for _ in range(25)]
    kinds = [e.kind for e in events if e is not None]
    assert kinds == ["complete"]
    assert d.completed
    assert d.directive() is None


def test_tick_exact_boundary_accumulation():
    """1200 ticks of 0.05 land on a 60 s boundary despite float accumulation."""
    d = Director(build_schedule([_constant("a", duration=60.0), _constant("b", duration=60.0)]))
    events = [d.tick(0.05) for _ in range(1200)]
    transitions = [e for e in events if e is not None]
    assert len(transitions) == 1
    assert transitions[0].kind == "advance"
    assert events[-1] is transitions[0]  # exactly at tick 1200


# ---------------------------------------------------------------- publish


def _drive(director, ticks, dt=0.05):
    published = []
    if director.publish_due:
        published.append((director.total_elapsed, director.directive()))
        director.mark_published()
    for _ in range(ticks):
        director.tick(dt)
        if director.publish_due:
            published.append((director.total_elapsed, director.directive()))
            director.mark_published()
    return published


def test_publish_cadence_30s():
    d = Director(build_schedule([_constant(duration=360.0)]))
    published = _drive(d, ticks=600)  # 30 s
    assert len(published) == 61  # floor(30/0.5) + 1, including t=0
    assert published[1][0] == pytest.approx(0.5)


def test_publish_not_due_between_multiples():
    d = Director(build_schedule([_constant(duration=360.0)]))
    assert d.publish_due  # t = 0 publish
    d.mark_published()
    for _ in range(9):  # to t = 0.45
        d.tick(0.05)
        assert not d.publish_due
    d.tick(0.05)  # t = 0.5
    assert d.publish_due


def test_publish_catches_up_after_large_tick():
    d = Director(build_schedule([_constant(duration=360.0)]))
    d.mark_published()
    d.tick(1.7)
    assert d.publish_due
    d.mark_published()
    assert not d.publish_due
    d.tick(0.2)  # total 1.9
    assert not d.publish_due
    d.tick(0.1)  # total 2.0
    assert d.publish_due


def test_directive_fields():
    d = Director(build_schedule([_constant("constant_coached", 2.25, "coached", 360.0)]))
    directive = d.directive()
    assert directive.set_point == 2.25
    assert directive.feedback is FeedbackType.COACHED
    assert directive.mode_label == "constant_coached"


def test_directive_velocity_matching_set_point_none():
    d = Director(build_schedule([{"label": "vm", "objective": "velocity_matching", "feedback": "coached", "duration": 10}]))
    assert d.directive().set_point is None


def test_dynamic_set_point_stream_switches_on_minute():
    d = Director(
        build_schedule(
            [{"label": "dyn", "objective": "dynamic_time_gap", "feedback": "coached", "duration": 180.0}]
        )
    )
    points = []
    for _ in range(3600):
        d.tick(0.05)
        if not d.completed:
            points.append(d.directive().set_point)
    # collapse runs
    runs = [points[0]]
    switch_ticks = []
    for i, p in enumerate(points[1:], start=1):
        if p != runs[-1]:
            runs.append(p)
            switch_ticks.append(i)
    assert runs == [2.25, 1.8, 2.25]
    assert abs(switch_ticks[0] - 1200) <= 1
    assert abs(switch_ticks[1] - 2400) <= 1


# --------------------------------------------------------------- commands


def test_advance_moves_to_next_segment():
    d = Director(build_schedule([_constant("a"), _constant("b")]))
    d.tick(0.05)
    event = d.handle_command(ModeCommand.ADVANCE)
    assert event.kind == "advance"
    assert d.segment.label == "b"
    assert d.elapsed_in_segment == 0.0


def test_advance_past_final_segment_completes():
    d = Director(build_schedule([_constant("a")]))
    event = d.handle_command(ModeCommand.ADVANCE)
    assert event.kind == "complete"
    assert d.completed


def test_reverse_restarts_when_deep_in_segment():
    d = Director(build_schedule([_constant("a"), _constant("b")]))
    d.handle_command(ModeCommand.ADVANCE)
    for _ in range(600):  # 30 s into b
        d.tick(0.05)
    event = d.handle_command(ModeCommand.REVERSE)
    assert event.kind == "restart"
    assert d.segment.label == "b"
    assert d.elapsed_in_segment == 0.0


def test_reverse_jumps_back_when_segment_just_started():
    d = Director(build_schedule([_constant("a"), _constant("b")]))
    d.handle_command(ModeCommand.ADVANCE)
    for _ in range(20):  # 1 s into b, under the restart threshold
        d.tick(0.05)
    event = d.handle_command(ModeCommand.REVERSE)
    assert event.kind == "reverse"
    assert d.segment.label == "a"


def test_reverse_clamps_at_first_segment():
    d = Director(build_schedule([_constant("a"), _constant("b")]))
    d.tick(0.05)
    event = d.handle_command(ModeCommand.REVERSE)
    assert event.kind == "restart"
    assert d.segment.label == "a"


def test_commands_ignored_after_completion():
    d = Director(build_schedule([_constant("a")]))
    d.handle_command(ModeCommand.ADVANCE)
    assert d.handle_command(ModeCommand.ADVANCE) is None
    assert d.handle_command(ModeCommand.REVERSE) is None


# ------------------------------------------------------------ determinism


def test_directive_stream_deterministic():
    def stream():
        d = Director(build_schedule(default_study_segments(segment_duration=30.0)))
        out = []
        for k in range(2400):
            d.tick(0.05)
            if k == 700:
                d.handle_command(ModeCommand.ADVANCE)
            if k == 1500:
                d.handle_command(ModeCommand.REVERSE)
            if d.publish_due:
                out.append(d.directive().to_json())
                d.mark_published()
        return "\n".join(out)

    assert stream() == stream()
