"""Experiment sequencing: which objective, feedback, and set point are
active right now.

A schedule is a flat list of timed segments. Dynamic time-gap segments are
flattened at build time into constant sub-segments alternating between
their set points, so everything downstream only ever sees a constant set
point or velocity matching. Directives are (re)published on a fixed 0.5 s
cadence aligned to total elapsed time; the wheel operator can jump the
schedule forward or back between publishes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum

from .coach import ConstantTimeGap, ControlObjective, FeedbackType, VelocityMatching
from .errors import ScheduleError

logger = logging.getLogger(__name__)

PUBLISH_PERIOD_S = 0.5
REVERSE_RESTART_THRESHOLD_S = 2.0
DYNAMIC_SET_POINTS = (2.25, 1.8)
DYNAMIC_PERIOD_S = 60.0
# boundary slop: forgives accumulated float error, far below one 50 ms tick
_EPS = 1e-6


@dataclass(frozen=True)
class ExperimentSegment:
    label: str
    objective: ControlObjective  # ConstantTimeGap or VelocityMatching after build
    feedback: FeedbackType
    duration: float


@dataclass(frozen=True)
class Directive:
    """What the coach is told to enforce. set_point is None exactly for
    velocity matching."""

    set_point: float | None
    feedback: FeedbackType
    mode_label: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "set_point": self.set_point,
                "feedback": self.feedback.value,
                "mode": self.mode_label,
            },
            separators=(",", ":"),
        )


class ModeCommand(Enum):
    ADVANCE = "advance"
    REVERSE = "reverse"


@dataclass(frozen=True)
class TransitionEvent:
    kind: str  # advance | reverse | restart | complete
    from_index: int
    to_index: int


def _expand_dynamic(label, feedback, duration, set_points, period):
    segments = []
    remaining = duration
    i = 0
    while remaining > _EPS:
        sub = min(period, remaining)
        segments.append(
            ExperimentSegment(
                label=label,
                objective=ConstantTimeGap(set_points[i % len(set_points)]),
                feedback=feedback,
                duration=sub,
            )
        )
        remaining -= sub
        i += 1
    return segments


def build_schedule(config: list[dict]) -> list[ExperimentSegment]:
    """Turn a parsed schedule config (list of segment mappings) into a flat
    segment list.

    Raises:
        ScheduleError: empty schedule, bad durations, unknown names, or a
            ghost velocity-matching segment (no defined semantics).
    """
    if not config:
        raise ScheduleError("schedule has no segments")
    segments: list[ExperimentSegment] = []
    for i, node in enumerate(config):
        where = f"segment {i}"
        if not isinstance(node, dict):
            raise ScheduleError(f"{where}: expected a mapping")
        try:
            duration = float(node.get("duration", 0))
        except (TypeError, ValueError):
            raise ScheduleError(f"{where}: duration must be a number") from None
        if duration <= 0:
            raise ScheduleError(f"{where}: duration must be positive, got {node.get('duration')}")

        kind = str(node.get("objective", ""))
        fb_name = str(node.get("feedback", ""))
        try:
            feedback = FeedbackType(fb_name)
        except ValueError:
            raise ScheduleError(f"{where}: unknown feedback {fb_name!r}") from None
        label = str(node.get("label", f"seg{i}_{kind}_{fb_name}"))

        if kind == "constant_time_gap":
            segments.append(
                ExperimentSegment(
                    label=label,
                    objective=ConstantTimeGap(float(node.get("set_point", 2.25))),
                    feedback=feedback,
                    duration=duration,
                )
            )
        elif kind == "velocity_matching":
            if feedback is FeedbackType.GHOST:
                raise ScheduleError(f"{where}: velocity matching has no ghost variant")
            segments.append(
                ExperimentSegment(
                    label=label, objective=VelocityMatching(), feedback=feedback, duration=duration
                )
            )
        elif kind == "dynamic_time_gap":
            set_points = tuple(float(x) for x in node.get("set_points", DYNAMIC_SET_POINTS))
            period = float(node.get("period", DYNAMIC_PERIOD_S))
            if not set_points:
                raise ScheduleError(f"{where}: dynamic segment needs at least one set point")
            if period <= 0:
                raise ScheduleError(f"{where}: period must be positive")
            segments.extend(_expand_dynamic(label, feedback, duration, set_points, period))
        else:
            raise ScheduleError(f"{where}: unknown objective {kind!r}")
    return segments


def default_study_segments(segment_duration: float = 360.0) -> list[dict]:
    """The full study sequence: warm-up, constant gap in all three feedback
    modes, velocity matching, then the alternating set-point block."""
    d = segment_duration
    return [
        {"label": "normal_driving", "objective": "velocity_matching", "feedback": "instructed", "duration": d},
        {"label": "constant_instructed", "objective": "constant_time_gap", "set_point": 2.25, "feedback": "instructed", "duration": d},
        {"label": "constant_coached", "objective": "constant_time_gap", "set_point": 2.25, "feedback": "coached", "duration": d},
        {"label": "constant_ghost", "objective": "constant_time_gap", "set_point": 2.25, "feedback": "ghost", "duration": d},
        {"label": "velmatch_instructed", "objective": "velocity_matching", "feedback": "instructed", "duration": d},
        {"label": "velmatch_coached", "objective": "velocity_matching", "feedback": "coached", "duration": d},
        {"label": "dynamic_instructed", "objective": "dynamic_time_gap", "feedback": "instructed", "duration": d},
        {"label": "dynamic_coached", "objective": "dynamic_time_gap", "feedback": "coached", "duration": d},
    ]


class Director:
    """Owns schedule position and the directive publish cadence.

    Single-threaded by design: the simulation loop calls tick/publish, and
    queued operator commands are applied between ticks by the same loop.
    """

    def __init__(self, schedule: list[ExperimentSegment]):
        if not schedule:
            raise ScheduleError("schedule has no segments")
        self.schedule = list(schedule)
        self.segment_index = 0
        self.elapsed_in_segment = 0.0
        self.total_elapsed = 0.0
        self.completed = False
        self._publish_count = 0

    @property
    def segment(self) -> ExperimentSegment:
        return self.schedule[self.segment_index]

    def tick(self, dt: float) -> TransitionEvent | None:
        """Advance time by dt, crossing segment boundaries with carry-over.

        Returns the transition that happened during this tick, if any.
        """
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.total_elapsed += dt
        if self.completed:
            return None
        self.elapsed_in_segment += dt
        event = None
        while self.elapsed_in_segment >= self.segment.duration - _EPS:
            carry = max(0.0, self.elapsed_in_segment - self.segment.duration)
            if self.segment_index + 1 >= len(self.schedule):
                self.completed = True
                self.elapsed_in_segment = self.segment.duration
                return TransitionEvent("complete", self.segment_index, self.segment_index)
            event = TransitionEvent("advance", self.segment_index, self.segment_index + 1)
            self.segment_index += 1
            self.elapsed_in_segment = carry
        return event

    @property
    def publish_due(self) -> bool:
        if self.completed:
            return False
        return self.total_elapsed >= self._publish_count * PUBLISH_PERIOD_S - _EPS

    def mark_published(self) -> None:
        crossed = math.floor((self.total_elapsed + _EPS) / PUBLISH_PERIOD_S)
        self._publish_count = crossed + 1

    def directive(self) -> Directive | None:
        """Directive for the active segment; None once the schedule is done."""
        if self.completed:
            return None
        seg = self.segment
        set_point = seg.objective.set_point if isinstance(seg.objective, ConstantTimeGap) else None
        return Directive(set_point=set_point, feedback=seg.feedback, mode_label=seg.label)

    def handle_command(self, cmd: ModeCommand) -> TransitionEvent | None:
        """Operator override from the steering-wheel buttons.

        Advance jumps to the next segment (completing the schedule from the
        last one). Reverse restarts the current segment unless it just
        started, in which case it jumps back one.
        """
        if self.completed:
            logger.info("ignoring %s: schedule already complete", cmd.value)
            return None
        here = self.segment_index
        if cmd is ModeCommand.ADVANCE:
            if here + 1 >= len(self.schedule):
                self.completed = True
                self.elapsed_in_segment = self.segment.duration
                return TransitionEvent("complete", here, here)
            self.segment_index += 1
            self.elapsed_in_segment = 0.0
            return TransitionEvent("advance", here, self.segment_index)
        if self.elapsed_in_segment > REVERSE_RESTART_THRESHOLD_S or here == 0:
            self.elapsed_in_segment = 0.0
            return TransitionEvent("restart", here, here)
        self.segment_index -= 1
        self.elapsed_in_segment = 0.0
        return TransitionEvent("reverse", here, self.segment_index)
