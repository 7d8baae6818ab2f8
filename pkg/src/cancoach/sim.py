"""Fixed-step closed-loop engine, trace recording, and CAN round-tripping.

One tick, in order: operator commands, director tick and directive refresh,
lead speed update, sensing (truth, CAN pipeline, or ghost), coach cue,
driver acceleration, Euler integration of ego speed and gap. The sample
recorded for tick k carries the state the controller saw at t = k*dt, so
the first sample is the initial condition.

The same engine drives batch runs, the live service, CAN log synthesis, and
log replay, which is what makes replayed traces comparable to simulated
ones.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np

from .can_codec import Catalog, builtin_catalog, decode, decode_log_lines, encode
from .coach import (
    CoachCue,
    ConstantTimeGap,
    FeedbackType,
    GapState,
    MIN_SPEED_MPS,
    VelocityMatching,
    compute_time_gap,
    gap_state,
)
from .coach import step as coach_step
from .director import Directive, Director, ModeCommand, build_schedule
from .drivers import ACCEL_MAX, ACCEL_MIN, DRIVER_PRESETS, AccModel, DriverModel, DriverParams
from .errors import ConfigError, DegenerateSpeedError, OrderingError
from .ghost import ghost_gap_state, init_ghost, step_ghost
from .radar_fusion import LeadTrace, LeadTracker, RadarTrack

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "v", "v_lead", "s", "delta_v", "tau", "set_point", "cue", "mode", "feedback")
N_RADAR_TRACKS = 16
# distractors stay this far from the lead so a stale buffer entry can never
# out-bid the true track during association
DISTRACTOR_CLEARANCE_M = 7.5


# --------------------------------------------------------------------- lead


@dataclass(frozen=True)
class ConstantLead:
    v: float = 29.0


@dataclass(frozen=True)
class PiecewiseLead:
    """Step profile: (time, speed) points, speed holds until the next point."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SinusoidalLead:
    mean: float = 29.0
    amplitude: float = 0.5
    period: float = 120.0


LeadProfile = ConstantLead | PiecewiseLead | SinusoidalLead


def lead_speed(profile: LeadProfile, t: float) -> float:
    if isinstance(profile, ConstantLead):
        return profile.v
    if isinstance(profile, SinusoidalLead):
        return profile.mean + profile.amplitude * math.sin(2.0 * math.pi * t / profile.period)
    v = profile.points[0][1]
    for pt, pv in profile.points:
        if t >= pt:
            v = pv
        else:
            break
    return v


# ------------------------------------------------------------------ sensing


@dataclass(frozen=True)
class TruthSensing:
    """Coach sees the exact kinematic state."""


@dataclass(frozen=True)
class CanSensing:
    """Coach sees what survives encode -> bus -> decode -> fusion.

    Optional gaussian sensor noise is applied to the radar quantities
    before encoding. Distractor tracks exercise the association logic.
    """

    noise_dist: float = 0.0
    noise_vel: float = 0.0
    distractors: int = 3


Sensing = TruthSensing | CanSensing


# -------------------------------------------------------------------- trace


@dataclass(frozen=True)
class TraceSample:
    t: float
    v: float
    v_lead: float
    s: float
    delta_v: float
    tau: float
    set_point: float | None
    cue: CoachCue
    mode: str
    feedback: FeedbackType


@dataclass
class Trace:
    """Ordered samples on a uniform grid plus the config fingerprint."""

    samples: list[TraceSample] = field(default_factory=list)
    fingerprint: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def column(self, name: str) -> np.ndarray:
        """Numeric column as float array; set_point None becomes nan."""
        if name == "set_point":
            return np.array(
                [math.nan if s.set_point is None else s.set_point for s in self.samples]
            )
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for s in self.samples:
            writer.writerow(
                [
                    repr(s.t),
                    repr(s.v),
                    repr(s.v_lead),
                    repr(s.s),
                    repr(s.delta_v),
                    repr(s.tau),
                    "" if s.set_point is None else repr(s.set_point),
                    s.cue.value,
                    s.mode,
                    s.feedback.value,
                ]
            )
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "Trace":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != list(TRACE_COLUMNS):
            raise ConfigError(f"not a trace file: header {header}")
        samples = []
        for row in reader:
            samples.append(
                TraceSample(
                    t=float(row[0]),
                    v=float(row[1]),
                    v_lead=float(row[2]),
                    s=float(row[3]),
                    delta_v=float(row[4]),
                    tau=float(row[5]),
                    set_point=None if row[6] == "" else float(row[6]),
                    cue=CoachCue(row[7]),
                    mode=row[8],
                    feedback=FeedbackType(row[9]),
                )
            )
        return cls(samples=samples)

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class SimConfig:
    schedule: tuple[dict, ...]
    dt: float = 0.05
    duration: float = 360.0
    v0: float = 29.0
    s0: float = 65.25
    lead: LeadProfile = ConstantLead()
    sensing: Sensing = TruthSensing()
    driver: str | DriverParams = "driver1"
    seed: int = 0

    def to_dict(self) -> dict:
        def plain(obj):
            if isinstance(obj, (ConstantLead, PiecewiseLead, SinusoidalLead, TruthSensing, CanSensing, DriverParams)):
                d = {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
                d["kind"] = type(obj).__name__
                return d
            if isinstance(obj, tuple):
                return [plain(x) for x in obj]
            return obj

        return {
            "schedule": [dict(seg) for seg in self.schedule],
            "dt": self.dt,
            "duration": self.duration,
            "v0": self.v0,
            "s0": self.s0,
            "lead": plain(self.lead),
            "sensing": plain(self.sensing),
            "driver": plain(self.driver),
            "seed": self.seed,
        }

    def config_fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _parse_lead(node) -> LeadProfile:
    if node is None:
        return ConstantLead()
    if not isinstance(node, dict):
        raise ConfigError(f"lead must be a mapping, got {node!r}")
    profile = node.get("profile", "constant")
    if profile == "constant":
        return ConstantLead(v=float(node.get("v", 29.0)))
    if profile == "sinusoidal":
        return SinusoidalLead(
            mean=float(node.get("mean", 29.0)),
            amplitude=float(node.get("amplitude", 0.5)),
            period=float(node.get("period", 120.0)),
        )
    if profile == "piecewise":
        points = node.get("points")
        if not points:
            raise ConfigError("piecewise lead needs points")
        return PiecewiseLead(points=tuple((float(t), float(v)) for t, v in points))
    raise ConfigError(f"unknown lead profile {profile!r}")


def _parse_sensing(node) -> Sensing:
    if node in (None, "truth"):
        return TruthSensing()
    if node == "can":
        return CanSensing()
    if isinstance(node, dict) and node.get("kind", "can") == "can":
        return CanSensing(
            noise_dist=float(node.get("noise_dist", 0.0)),
            noise_vel=float(node.get("noise_vel", 0.0)),
            distractors=int(node.get("distractors", 3)),
        )
    raise ConfigError(f"unknown sensing spec {node!r}")


def _parse_driver(node) -> str | DriverParams:
    if isinstance(node, str):
        if node in DRIVER_PRESETS or node in ("acc", "human"):
            return node
        raise ConfigError(f"unknown driver {node!r}; presets: {sorted(DRIVER_PRESETS)}, acc, human")
    if isinstance(node, dict):
        try:
            return DriverParams(**node)
        except TypeError as exc:
            raise ConfigError(f"bad driver params: {exc}") from None
    raise ConfigError(f"driver must be a name or a params mapping, got {node!r}")


def load_sim_config(doc: dict) -> SimConfig:
    """Validate a parsed YAML document into a SimConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    schedule = doc.get("schedule")
    if not isinstance(schedule, list) or not schedule:
        raise ConfigError("config needs a non-empty schedule list")
    initial = doc.get("initial") or {}
    try:
        cfg = SimConfig(
            schedule=tuple(schedule),
            dt=float(doc.get("dt", 0.05)),
            duration=float(doc.get("duration", 360.0)),
            v0=float(initial.get("v", 29.0)),
            s0=float(initial.get("s", 65.25)),
            lead=_parse_lead(doc.get("lead")),
            sensing=_parse_sensing(doc.get("sensing")),
            driver=_parse_driver(doc.get("driver", "driver1")),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    if cfg.dt <= 0:
        raise ConfigError(f"dt must be positive, got {cfg.dt}")
    if cfg.duration <= 0:
        raise ConfigError(f"duration must be positive, got {cfg.duration}")
    if cfg.v0 < 0:
        raise ConfigError(f"initial speed must be non-negative, got {cfg.v0}")
    return cfg


# ------------------------------------------------------------ CAN synthesis


class FrameSynthesizer:
    """Emits the per-tick CAN frames a drive would have produced."""

    def __init__(
        self,
        catalog: Catalog | None = None,
        *,
        distractors: int = 3,
        seed: int = 0,
        noise_dist: float = 0.0,
        noise_vel: float = 0.0,
    ):
        self.catalog = catalog or builtin_catalog()
        self.rng = np.random.default_rng([seed, 0x5EED])
        self.noise_dist = noise_dist
        self.noise_vel = noise_vel
        self.lead_track = int(self.rng.integers(0, N_RADAR_TRACKS))
        others = [i for i in range(N_RADAR_TRACKS) if i != self.lead_track]
        self.distractor_tracks = others[: max(0, min(distractors, N_RADAR_TRACKS - 1))]

    def _distractor_distance(self, s: float) -> float:
        while True:
            d = float(self.rng.uniform(5.0, 150.0))
            if not (abs(d - s) <= DISTRACTOR_CLEARANCE_M):
                return d

    def frames_for(self, t: float, v: float, s: float, delta_v: float, include_lead_info: bool):
        """Frames for one tick: ego speed, lead-bearing track, distractors,
        and (on 1 Hz ticks) the trusted lead distance."""
        frames = []
        frames.append(encode("EGO_SPEED", {"speed": max(0.0, v)}, self.catalog, timestamp=t))
        s_meas = s + (float(self.rng.standard_normal()) * self.noise_dist if self.noise_dist else 0.0)
        dv_meas = delta_v + (float(self.rng.standard_normal()) * self.noise_vel if self.noise_vel else 0.0)
        s_meas = max(0.0, s_meas)  # radar cannot report a negative range
        frames.append(
            encode(
                f"TRACK_{self.lead_track:02d}",
                {"rel_dist": s_meas, "rel_vel": dv_meas, "valid": 1},
                self.catalog,
                timestamp=t,
            )
        )
        for idx in self.distractor_tracks:
            frames.append(
                encode(
                    f"TRACK_{idx:02d}",
                    {
                        "rel_dist": self._distractor_distance(s),
                        "rel_vel": float(self.rng.uniform(-2.0, 2.0)),
                        "valid": 1,
                    },
                    self.catalog,
                    timestamp=t,
                )
            )
        if include_lead_info:
            frames.append(encode("LEAD_INFO", {"lead_dist": s_meas}, self.catalog, timestamp=t))
        return frames


def synth_can_log(
    trace: Trace,
    catalog: Catalog | None = None,
    *,
    distractors: int = 3,
    seed: int = 0,
) -> list[str]:
    """Render a trace back into log lines the decoder would accept.

    Tracks go out at the trace rate, the trusted lead distance once per
    second on the trace grid.
    """
    synth = FrameSynthesizer(catalog, distractors=distractors, seed=seed)
    if not trace.samples:
        return []
    dt = trace.samples[1].t - trace.samples[0].t if len(trace.samples) > 1 else 0.05
    per_second = max(1, round(1.0 / dt))
    lines = []
    for k, sample in enumerate(trace.samples):
        frames = synth.frames_for(
            sample.t, sample.v, sample.s, sample.delta_v, include_lead_info=(k % per_second == 0)
        )
        lines.extend(f.to_log_line() for f in frames)
    return lines


# ------------------------------------------------------------------- engine


def _make_driver(config: SimConfig):
    if isinstance(config.driver, DriverParams):
        return DriverModel(config.driver, run_seed=config.seed)
    if config.driver == "acc":
        return AccModel()
    if config.driver == "human":
        return None
    return DriverModel(DRIVER_PRESETS[config.driver], run_seed=config.seed)


class Simulation:
    """One live closed-loop run, stepped a tick at a time."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.director = Director(build_schedule(list(config.schedule)))
        self.driver = _make_driver(config)
        self.t = 0.0
        self.tick_count = 0
        self.v = config.v0
        self.s = config.s0
        self.v_lead = lead_speed(config.lead, 0.0)
        self.ghost = None
        self.directive: Directive | None = None
        self.done = False
        self.samples: list[TraceSample] = []
        self.no_estimate_ticks = 0
        if isinstance(config.sensing, CanSensing):
            self._synth = FrameSynthesizer(
                distractors=config.sensing.distractors,
                seed=config.seed,
                noise_dist=config.sensing.noise_dist,
                noise_vel=config.sensing.noise_vel,
            )
            self._tracker = LeadTracker()
            self._ticks_per_second = max(1, round(1.0 / config.dt))
        else:
            self._synth = None

    # -- sensing -----------------------------------------------------------

    def _sense_can(self) -> GapState | None:
        """Run truth through the codec and fusion pipe; None when the
        pipeline has no current estimate."""
        cfg = self.config
        frames = self._synth.frames_for(
            self.t,
            self.v,
            self.s,
            self.v_lead - self.v,
            include_lead_info=(self.tick_count % self._ticks_per_second == 0),
        )
        v_meas = self.v
        fresh_lead = False
        for frame in frames:
            msg = decode(frame, self._synth.catalog)
            if msg.name == "EGO_SPEED":
                v_meas = msg.signals["speed"]
            elif msg.name.startswith("TRACK_"):
                self._tracker.push_track(
                    RadarTrack(
                        track_index=int(msg.name.split("_")[1]),
                        rel_dist=msg.signals["rel_dist"],
                        rel_vel=msg.signals["rel_vel"],
                        timestamp=msg.timestamp,
                        valid=msg.signals["valid"] >= 0.5,
                    )
                )
            elif msg.name == "LEAD_INFO":
                self._tracker.push_lead(LeadTrace(msg.signals["lead_dist"], msg.timestamp))
                fresh_lead = True
        if not fresh_lead:
            self._tracker.advance(self.config.dt)
        est = self._tracker.estimate
        if est is None:
            return None
        return GapState(s=est.s, delta_v=est.delta_v, tau=compute_time_gap(est.s, v_meas))

    # -- one tick ----------------------------------------------------------

    def step(self, human_accel: float | None = None, commands: Iterable[ModeCommand] = ()):
        """Advance one tick. Returns (sample, events); sample is None only
        when the schedule completed on a previous tick."""
        if self.done:
            return None, []
        events = []
        for cmd in commands:
            ev = self.director.handle_command(cmd)
            if ev is not None:
                events.append(ev)
            self.directive = self.director.directive()

        ev = self.director.tick(self.config.dt)
        if ev is not None:
            events.append(ev)
        if self.director.publish_due:
            self.directive = self.director.directive()
            self.director.mark_published()
        directive = self.directive
        if directive is None:
            # schedule completed by command or by this tick before anything ran
            self.done = True
            return None, events

        self.t = self.tick_count * self.config.dt
        self.v_lead = lead_speed(self.config.lead, self.t)

        # ghost lifecycle follows the active directive
        if directive.feedback is FeedbackType.GHOST:
            if self.ghost is None:
                self.ghost = init_ghost()
                if self._synth is not None:
                    # radar restarts clean after the virtual segment
                    self._tracker = LeadTracker()
        else:
            self.ghost = None

        # what the coach sees
        try:
            if self.ghost is not None:
                gap_seen = ghost_gap_state(self.ghost, self.v)
            elif isinstance(self.config.sensing, CanSensing):
                gap_seen = self._sense_can()
                if gap_seen is None:
                    self.no_estimate_ticks += 1
            else:
                gap_seen = gap_state(self.s, self.v, self.v_lead)
        except DegenerateSpeedError:
            if self.driver is not None:
                raise
            # a human can bring the car to a stop; that is a fact of live
            # driving, not a fault. τ goes undefined and the cue falls silent.
            if self.ghost is not None:
                gap_seen = GapState(self.ghost.virtual_gap, self.ghost.v_ghost - self.v, math.nan)
            elif isinstance(self.config.sensing, CanSensing):
                # the guard trips after fusion produced an estimate
                est = self._tracker.estimate
                gap_seen = GapState(est.s, est.delta_v, math.nan)
            else:
                gap_seen = GapState(self.s, self.v_lead - self.v, math.nan)

        if gap_seen is None:
            cue = CoachCue.NONE
        else:
            objective = (
                VelocityMatching()
                if directive.set_point is None
                else ConstantTimeGap(directive.set_point)
            )
            cue = coach_step(objective, directive.feedback, gap_seen, tau_star_now=directive.set_point)

        # what the driver does; modeled drivers watch the road, not the bus
        if self.driver is None:
            a = 0.0 if human_accel is None else min(max(human_accel, ACCEL_MIN), ACCEL_MAX)
        elif gap_seen is None:
            a = 0.0
        else:
            gap_felt = gap_seen if self.ghost is not None else gap_state(self.s, self.v, self.v_lead)
            a = self.driver.accel(self.t, gap_felt, self.v, directive, cue)

        sample = TraceSample(
            t=self.t,
            v=self.v,
            v_lead=self.ghost.v_ghost if self.ghost is not None else self.v_lead,
            s=gap_seen.s if gap_seen is not None else math.nan,
            delta_v=gap_seen.delta_v if gap_seen is not None else math.nan,
            tau=gap_seen.tau if gap_seen is not None else math.nan,
            set_point=directive.set_point,
            cue=cue,
            mode=directive.mode_label,
            feedback=directive.feedback,
        )
        self.samples.append(sample)

        # integrate: ego first, then whichever gap is live
        v_next = max(0.0, self.v + a * self.config.dt)
        if self.ghost is not None:
            self.ghost = step_ghost(self.ghost, v_next, self.config.dt)
        self.s = self.s + (self.v_lead - v_next) * self.config.dt
        self.v = v_next
        self.tick_count += 1

        if self.director.completed:
            self.done = True
        return sample, events


def run(config: SimConfig) -> Trace:
    """Run the schedule for config.duration (or until it completes).

    Raises:
        ConfigError: the human driver has no input source in batch runs.
        DegenerateSpeedError: ego speed fell below the guard; the run is
            not meaningful past that point.
    """
    if config.driver == "human":
        raise ConfigError("human driver needs the live service, not a batch run")
    sim = Simulation(config)
    n_ticks = round(config.duration / config.dt)
    while sim.tick_count < n_ticks and not sim.done:
        sim.step()
    return Trace(samples=sim.samples, fingerprint=config.config_fingerprint())


# ------------------------------------------------------------------- replay


@dataclass
class ReplayResult:
    trace: Trace
    skipped_lines: int
    no_match_ticks: int


def replay(
    lines: Iterable[str],
    catalog: Catalog | None = None,
    *,
    schedule: list[dict] | None = None,
) -> ReplayResult:
    """Reconstruct a trace from a CAN log through the same fusion pipeline
    the live system uses.

    Each EGO_SPEED frame defines one tick. Cues are recomputed from the
    schedule (default: the constant coached objective). Ticks with no lead
    estimate are kept, flagged with nan kinematics.

    Raises:
        OrderingError: log timestamps move backwards.
    """
    catalog = catalog or builtin_catalog()
    messages, skipped = decode_log_lines(lines, catalog)
    if skipped:
        logger.warning("replay: skipped %d undecodable lines", skipped)
    for a, b in zip(messages, messages[1:]):
        if b.timestamp < a.timestamp:
            raise OrderingError(f"log goes backwards at t={b.timestamp}")

    sched = schedule or [
        {
            "label": "replay_coached",
            "objective": "constant_time_gap",
            "set_point": 2.25,
            "feedback": "coached",
            "duration": 1e9,
        }
    ]
    director = Director(build_schedule(sched))
    tracker = LeadTracker()
    directive = None
    samples: list[TraceSample] = []
    no_match = 0
    t0 = None
    prev_t = None
    fresh_lead = False

    for msg in messages:
        if msg.name.startswith("TRACK_"):
            tracker.push_track(
                RadarTrack(
                    track_index=int(msg.name.split("_")[1]),
                    rel_dist=msg.signals["rel_dist"],
                    rel_vel=msg.signals["rel_vel"],
                    timestamp=msg.timestamp,
                    valid=msg.signals["valid"] >= 0.5,
                )
            )
            continue
        if msg.name == "LEAD_INFO":
            tracker.push_lead(LeadTrace(msg.signals["lead_dist"], msg.timestamp))
            fresh_lead = True
            continue
        if msg.name != "EGO_SPEED":
            continue

        # one tick per ego-speed frame
        if t0 is None:
            t0 = msg.timestamp
        t = msg.timestamp - t0
        if prev_t is None:
            if director.publish_due:
                directive = director.directive()
                director.mark_published()
        else:
            dt = msg.timestamp - prev_t
            if dt > 0:
                director.tick(dt)
                if director.publish_due:
                    directive = director.directive()
                    director.mark_published()
                if not fresh_lead:
                    tracker.advance(dt)
        fresh_lead = False
        prev_t = msg.timestamp
        if director.completed or directive is None:
            break

        v = msg.signals["speed"]
        est = tracker.estimate
        if est is None:
            no_match += 1
            samples.append(
                TraceSample(
                    t=t, v=v, v_lead=math.nan, s=math.nan, delta_v=math.nan, tau=math.nan,
                    set_point=directive.set_point, cue=CoachCue.NONE,
                    mode=directive.mode_label, feedback=directive.feedback,
                )
            )
            continue
        tau = est.s / v if v >= MIN_SPEED_MPS else math.nan
        if math.isnan(tau):
            cue = CoachCue.NONE
        else:
            objective = (
                VelocityMatching() if directive.set_point is None else ConstantTimeGap(directive.set_point)
            )
            gap = GapState(s=est.s, delta_v=est.delta_v, tau=tau)
            cue = coach_step(objective, directive.feedback, gap, tau_star_now=directive.set_point)
        samples.append(
            TraceSample(
                t=t, v=v, v_lead=v + est.delta_v, s=est.s, delta_v=est.delta_v, tau=tau,
                set_point=directive.set_point, cue=cue,
                mode=directive.mode_label, feedback=directive.feedback,
            )
        )
    return ReplayResult(Trace(samples=samples), skipped_lines=skipped, no_match_ticks=no_match)
