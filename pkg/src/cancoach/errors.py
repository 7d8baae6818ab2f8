"""Exception types shared across the package.

Every error raised by cancoach code derives from CanCoachError so callers
can catch one base type at process boundaries (the CLI maps them to exit
codes). Subclasses exist where a caller plausibly wants to branch.
"""

from __future__ import annotations


class CanCoachError(Exception):
    """Base class for all cancoach errors."""


class LogParseError(CanCoachError):
    """A candump-style log line could not be parsed.

    The message names the offending field (timestamp, bus, can_id, payload).
    """


class UnknownMessageError(CanCoachError):
    """Frame id or message name not present in the catalog."""


class TruncatedPayloadError(CanCoachError):
    """Payload too short for a signal's declared bit extent."""


class SignalRangeError(CanCoachError):
    """Physical value does not fit the signal's raw integer range."""


class CatalogError(CanCoachError):
    """Catalog text is invalid. Carries every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class OrderingError(CanCoachError):
    """Timestamps moved backwards where monotonicity is required."""


class DegenerateSpeedError(CanCoachError):
    """Ego speed below the guard floor: time gap is undefined."""


class UnsupportedCombinationError(CanCoachError):
    """Objective/feedback pairing that has no defined cue semantics."""


class ScheduleError(CanCoachError):
    """Experiment schedule config is invalid."""


class InsufficientDataError(CanCoachError):
    """Not enough samples to compute the requested statistic."""


class ConfigError(CanCoachError):
    """Run configuration is invalid."""
