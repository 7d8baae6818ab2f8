"""Cue generation: turning gap error into accelerate/decelerate prompts.

The coach never commands a quantity, only a direction. A high tone asks the
driver to speed up, a low tone to slow down, silence means hold. Dead bands
around the target keep the cab quiet when the driver is close enough; all
comparisons against the band edges are strict, so a state exactly on an
edge stays silent.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateSpeedError, UnsupportedCombinationError

TIME_GAP_DEADBAND_S = 0.05
VELOCITY_DEADBAND_MPS = 0.4
MIN_SPEED_MPS = 1.0


class CoachCue(Enum):
    ACCELERATE = "accelerate"
    DECELERATE = "decelerate"
    NONE = "none"


class FeedbackType(Enum):
    INSTRUCTED = "instructed"
    COACHED = "coached"
    GHOST = "ghost"


@dataclass(frozen=True)
class ConstantTimeGap:
    """Hold a fixed time gap behind the lead."""

    set_point: float = 2.25


@dataclass(frozen=True)
class VelocityMatching:
    """Match the lead's speed; the gap itself is unregulated."""


@dataclass(frozen=True)
class DynamicTimeGap:
    """Alternate between set points on a fixed period."""

    set_points: tuple[float, ...] = (2.25, 1.8)
    period: float = 60.0


ControlObjective = ConstantTimeGap | VelocityMatching | DynamicTimeGap


@dataclass(frozen=True)
class GapState:
    """Kinematic state of the following situation at one instant.

    delta_v is lead speed minus ego speed: negative while closing in.
    """

    s: float
    delta_v: float
    tau: float


def compute_time_gap(s: float, v: float, v_min: float = MIN_SPEED_MPS) -> float:
    """Time gap s/v, guarded against near-standstill speeds."""
    if v < v_min:
        raise DegenerateSpeedError(f"ego speed {v} m/s below guard {v_min} m/s")
    return s / v


def gap_state(s: float, v: float, v_lead: float, v_min: float = MIN_SPEED_MPS) -> GapState:
    """Build a GapState from raw kinematics; tau is derived, never supplied."""
    return GapState(s=s, delta_v=v_lead - v, tau=compute_time_gap(s, v, v_min))


def time_gap_cue(tau: float, tau_star: float, deadband: float = TIME_GAP_DEADBAND_S) -> CoachCue:
    """Direction that moves tau toward tau_star.

    Too close (small tau) means slow down to open the gap; too far means
    speed up to close it. Inside the band, and exactly on its edges, stay
    silent.
    """
    if tau < tau_star - deadband:
        return CoachCue.DECELERATE
    if tau > tau_star + deadband:
        return CoachCue.ACCELERATE
    return CoachCue.NONE


def velocity_cue(delta_v: float, deadband: float = VELOCITY_DEADBAND_MPS) -> CoachCue:
    """Direction that zeroes the speed difference to the lead."""
    if delta_v > deadband:
        return CoachCue.ACCELERATE
    if delta_v < -deadband:
        return CoachCue.DECELERATE
    return CoachCue.NONE


def step(
    objective: ControlObjective,
    feedback: FeedbackType,
    gap: GapState,
    tau_star_now: float | None = None,
) -> CoachCue:
    """One coach decision.

    Args:
        objective: active control objective.
        feedback: feedback mode; Instructed always yields silence.
        gap: current gap state (virtual gap when ghosting).
        tau_star_now: active set point for time-gap objectives. Required for
            DynamicTimeGap, defaults to the configured set point for
            ConstantTimeGap.

    Raises:
        UnsupportedCombinationError: Ghost feedback with VelocityMatching;
            a ghost has no observable speed to match.
    """
    if feedback is FeedbackType.INSTRUCTED:
        return CoachCue.NONE

    if isinstance(objective, VelocityMatching):
        if feedback is FeedbackType.GHOST:
            raise UnsupportedCombinationError("velocity matching has no ghost variant")
        return velocity_cue(gap.delta_v)

    if tau_star_now is None:
        if isinstance(objective, DynamicTimeGap):
            raise ValueError("DynamicTimeGap requires tau_star_now")
        tau_star_now = objective.set_point
    return time_gap_cue(gap.tau, tau_star_now)
