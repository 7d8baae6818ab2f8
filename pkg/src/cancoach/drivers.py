"""Driver response models for closed-loop experiments.

Three response laws share one accel interface:

* instructed: the driver was told a target gap once and regulates it from
  their own (noisy, biased) perception of the scene.
* coached: the driver responds to audible cues after a reaction delay, with
  a quarter-strength perception term on top (they still see the road).
* ghost: cue response only; there is nothing to see.

An idealized constant-time-gap controller is included as a reference
passenger with no noise, bias, or delay.

All accelerations are clamped to a comfortable envelope; nobody brakes or
launches harder for being coached.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .coach import CoachCue, FeedbackType, GapState
from .director import Directive

ACCEL_MIN = -3.0
ACCEL_MAX = 2.0
ACC_GAIN_S = 0.23
ACC_GAIN_V = 0.4
COACHED_PERCEPTION_WEIGHT = 0.25


def clamp_accel(a: float) -> float:
    return min(max(a, ACCEL_MIN), ACCEL_MAX)


@dataclass(frozen=True)
class DriverParams:
    """Behavioral parameters of one modeled driver.

    target_bias scales the gap the driver actually holds relative to the
    commanded one: 1.0 is obedient, above 1 hangs back, below 1 crowds.
    """

    reaction_delay: float = 0.5
    gap_noise_frac: float = 0.10
    relvel_noise_std: float = 0.3
    target_bias: float = 1.0
    cue_accel: float = 0.3
    gain_s: float = 0.05
    gain_v: float = 0.4
    seed: int = 0


@dataclass(frozen=True)
class PerceivedState:
    s: float
    delta_v: float


def perceive(gap: GapState, params: DriverParams, rng) -> PerceivedState:
    """Corrupt the true gap state the way a human eyeball does.

    Distance error is proportional (hard to judge far gaps), relative speed
    error is additive. Draws exactly two standard normals from rng, distance
    first.
    """
    n_s = rng.standard_normal()
    n_v = rng.standard_normal()
    s = max(0.0, gap.s * (1.0 + params.gap_noise_frac * n_s))
    return PerceivedState(s=s, delta_v=gap.delta_v + params.relvel_noise_std * n_v)


def instructed_accel(
    perceived: PerceivedState,
    v: float,
    tau_star: float | None,
    params: DriverParams,
) -> float:
    """Self-regulation from memory of the instruction.

    With no gap target (velocity matching) only the speed-difference term
    remains.
    """
    a = params.gain_v * perceived.delta_v
    if tau_star is not None:
        a += params.gain_s * (perceived.s - params.target_bias * tau_star * v)
    return clamp_accel(a)


class CueHistory:
    """Time-stamped record of cues heard, queried with a reaction delay."""

    def __init__(self):
        self._times: list[float] = []
        self._cues: list[CoachCue] = []

    def append(self, t: float, cue: CoachCue) -> None:
        if self._times and t < self._times[-1]:
            raise ValueError(f"cue at t={t} recorded after t={self._times[-1]}")
        self._times.append(t)
        self._cues.append(cue)

    def cue_at(self, t: float) -> CoachCue:
        """Most recent cue stamped at or before t; silence before any cue."""
        i = bisect_right(self._times, t)
        return self._cues[i - 1] if i else CoachCue.NONE


def coached_accel(
    perceived: PerceivedState,
    v: float,
    tau_star: float | None,
    cue_history: CueHistory,
    t: float,
    params: DriverParams,
    feedback: FeedbackType,
) -> float:
    """Cue response plus (when not ghosting) a weak perception term.

    The cue acted on is the one active at t - reaction_delay: humans react
    late, and that lag is what sets the size of the hunting oscillation.
    """
    cue = cue_history.cue_at(t - params.reaction_delay)
    if cue is CoachCue.ACCELERATE:
        a = params.cue_accel
    elif cue is CoachCue.DECELERATE:
        a = -params.cue_accel
    else:
        a = 0.0
    if feedback is not FeedbackType.GHOST:
        a += COACHED_PERCEPTION_WEIGHT * (
            instructed_accel(perceived, v, tau_star, params)
        )
    return clamp_accel(a)


def acc_accel(
    gap: GapState,
    v: float,
    tau_star: float | None,
    k1: float = ACC_GAIN_S,
    k2: float = ACC_GAIN_V,
) -> float:
    """Linear constant-time-gap law on true state, no noise or delay."""
    a = k2 * gap.delta_v
    if tau_star is not None:
        a += k1 * (gap.s - tau_star * v)
    return clamp_accel(a)


class DriverModel:
    """Stateful wrapper the simulation steps once per tick.

    Keeps the driver's private rng and cue memory. The same seed gives the
    same accelerations for the same inputs, tick for tick.
    """

    def __init__(self, params: DriverParams, run_seed: int = 0):
        self.params = params
        self.rng = np.random.default_rng([run_seed, params.seed])
        self.cues = CueHistory()

    def accel(self, t: float, gap: GapState, v: float, directive: Directive, cue: CoachCue) -> float:
        self.cues.append(t, cue)
        feedback = directive.feedback
        if feedback is FeedbackType.INSTRUCTED:
            return instructed_accel(perceive(gap, self.params, self.rng), v, directive.set_point, self.params)
        if feedback is FeedbackType.GHOST:
            return coached_accel(
                PerceivedState(gap.s, gap.delta_v), v, directive.set_point,
                self.cues, t, self.params, feedback,
            )
        return coached_accel(
            perceive(gap, self.params, self.rng), v, directive.set_point,
            self.cues, t, self.params, feedback,
        )


class AccModel:
    """Reference controller behind the same interface as DriverModel."""

    def __init__(self, k1: float = ACC_GAIN_S, k2: float = ACC_GAIN_V):
        self.k1 = k1
        self.k2 = k2

    def accel(self, t: float, gap: GapState, v: float, directive: Directive, cue: CoachCue) -> float:
        return acc_accel(gap, v, directive.set_point, self.k1, self.k2)


# Six study drivers. Biases span crowding to hanging far back; perception
# noise and reaction delay widen the spread so the population is not six
# copies of one person. Unaided distance judgment is poor (large gap noise),
# closing-speed judgment worse, and cue responses lag by over a second for
# most of them. driver4 is the outlier twice over: hopeless unaided, yet
# the quickest and firmest to follow a cue.
DRIVER_PRESETS: dict[str, DriverParams] = {
    "driver1": DriverParams(target_bias=0.87, gap_noise_frac=0.30, relvel_noise_std=1.30, cue_accel=0.45, reaction_delay=1.50, seed=1),
    "driver2": DriverParams(target_bias=0.94, gap_noise_frac=0.35, relvel_noise_std=1.30, cue_accel=0.50, reaction_delay=1.55, seed=2),
    "driver3": DriverParams(target_bias=1.17, gap_noise_frac=0.45, relvel_noise_std=2.00, cue_accel=0.55, reaction_delay=1.55, seed=3),
    "driver4": DriverParams(target_bias=1.60, gap_noise_frac=0.40, relvel_noise_std=1.50, gain_s=0.04, cue_accel=1.00, reaction_delay=0.45, seed=4),
    "driver5": DriverParams(target_bias=0.83, gap_noise_frac=0.40, relvel_noise_std=1.60, cue_accel=0.50, reaction_delay=1.50, seed=5),
    "driver6": DriverParams(target_bias=1.03, gap_noise_frac=0.36, relvel_noise_std=1.40, cue_accel=0.45, reaction_delay=1.55, seed=6),
}
