"""Picking the radar track that belongs to the lead vehicle.

The radar publishes up to 16 object tracks at 20 Hz with no statement about
which one is the car ahead. The stock following system publishes a trusted
lead distance at only 1 Hz. Association matches the slow-but-trusted lead
distance against the fast track set; between lead updates the chosen
estimate is dead-reckoned forward with its own relative velocity so the
20 Hz cue loop never consumes stale data.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, replace

from .errors import OrderingError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_S = 1.5
DEFAULT_TOLERANCE_M = 2.5


@dataclass(frozen=True)
class RadarTrack:
    """One radar object-track sample."""

    track_index: int
    rel_dist: float
    rel_vel: float
    timestamp: float
    valid: bool = True


@dataclass(frozen=True)
class LeadTrace:
    """Trusted lead distance from the stock system (slow channel)."""

    lead_dist: float
    timestamp: float


@dataclass(frozen=True)
class LeadEstimate:
    """Fused lead state: where the lead is believed to be right now.

    ``age`` is seconds since the raw radar sample backing this estimate.
    """

    s: float
    delta_v: float
    source_track: int
    age: float


class TrackBuffer:
    """Sliding time window of recent radar tracks.

    Push order must be non-decreasing in timestamp; equal timestamps are
    fine (a whole radar scan shares one). Entries older than ``window``
    relative to the newest push are dropped.
    """

    def __init__(self, window: float = DEFAULT_WINDOW_S):
        if window <= 0:
            raise ValueError(f"window must be positive, got {window}")
        self.window = window
        self._entries: deque[RadarTrack] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def latest_timestamp(self) -> float | None:
        return self._entries[-1].timestamp if self._entries else None

    def push(self, track: RadarTrack) -> None:
        latest = self.latest_timestamp
        if latest is not None and track.timestamp < latest:
            raise OrderingError(
                f"track at t={track.timestamp} pushed after t={latest}"
            )
        self._entries.append(track)
        while track.timestamp - self._entries[0].timestamp > self.window:
            self._entries.popleft()


def associate(
    buffer: TrackBuffer,
    lead: LeadTrace,
    tolerance: float = DEFAULT_TOLERANCE_M,
) -> LeadEstimate | None:
    """Match the trusted lead distance against buffered tracks.

    Selection among valid tracks within ``tolerance`` of the lead distance:
    smallest mismatch wins; ties go to the most recent sample, then to the
    lowest track index. Returns None when nothing qualifies (no match is an
    expected outcome, not an error).
    """
    best: RadarTrack | None = None
    best_key: tuple[float, float, int] | None = None
    for track in buffer:
        if not track.valid:
            continue
        mismatch = abs(track.rel_dist - lead.lead_dist)
        if mismatch > tolerance:
            continue
        key = (mismatch, -track.timestamp, track.track_index)
        if best_key is None or key < best_key:
            best, best_key = track, key
    if best is None:
        return None
    now = buffer.latest_timestamp
    assert now is not None
    return LeadEstimate(
        s=best.rel_dist,
        delta_v=best.rel_vel,
        source_track=best.track_index,
        age=now - best.timestamp,
    )


def extrapolate(estimate: LeadEstimate, dt: float) -> LeadEstimate:
    """Dead-reckon the estimate forward by dt seconds at constant delta_v."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    return replace(estimate, s=estimate.s + estimate.delta_v * dt, age=estimate.age + dt)


class LeadTracker:
    """Stateful fusion pipeline: tracks in, current lead estimate out.

    Feed every decoded radar track through :meth:`push_track`. Each trusted
    lead update re-associates; between updates call :meth:`advance` once per
    control tick. A failed association clears the estimate rather than
    serving stale data.
    """

    def __init__(self, window: float = DEFAULT_WINDOW_S, tolerance: float = DEFAULT_TOLERANCE_M):
        self.buffer = TrackBuffer(window)
        self.tolerance = tolerance
        self.estimate: LeadEstimate | None = None

    def push_track(self, track: RadarTrack) -> None:
        self.buffer.push(track)

    def push_lead(self, lead: LeadTrace) -> LeadEstimate | None:
        self.estimate = associate(self.buffer, lead, self.tolerance)
        if self.estimate is None:
            logger.debug("no track within %.2f m of lead at t=%.3f", self.tolerance, lead.timestamp)
        return self.estimate

    def advance(self, dt: float) -> LeadEstimate | None:
        if self.estimate is not None:
            self.estimate = extrapolate(self.estimate, dt)
        return self.estimate
