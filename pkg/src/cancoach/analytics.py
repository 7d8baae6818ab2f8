"""Tracking-error metrics, preprocessing filters, and summary reports.

The error definitions: eps_tau = tau* - tau and eps_s = v*tau* - s, both
per sample against the set point active at that sample. Before statistics,
segments are filtered: drop samples below the 10th percentile of speed and
outside the 5th..99th percentile band of relative velocity, thresholds
computed per segment. Reports carry signed means and magnitudes side by
side, and percent reductions against the instructed baseline of the same
segment family.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coach import FeedbackType
from .errors import InsufficientDataError
from .sim import Trace

VELOCITY_FLOOR_PCT = 10.0
RELVEL_LOW_PCT = 5.0
RELVEL_HIGH_PCT = 99.0
HIST_BIN_S = 0.05

_MODE_SUFFIXES = ("_instructed", "_coached", "_ghost")


# ------------------------------------------------------------ error series


def time_gap_error(tau, set_points) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    set_points = np.asarray(set_points, dtype=float)
    if tau.shape != set_points.shape:
        raise ValueError(f"length mismatch: {tau.shape} vs {set_points.shape}")
    return set_points - tau


def space_gap_error(v, s, set_points) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    set_points = np.asarray(set_points, dtype=float)
    if not (v.shape == s.shape == set_points.shape):
        raise ValueError("length mismatch between v, s, and set points")
    return v * set_points - s


def error_series(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """(eps_tau, eps_s) for a trace that has a time-gap target throughout.

    Raises:
        ValueError: any sample lacks a set point (velocity matching).
    """
    if any(s.set_point is None for s in trace.samples):
        raise ValueError("trace has samples with no time-gap target")
    sp = trace.column("set_point")
    return (
        time_gap_error(trace.column("tau"), sp),
        space_gap_error(trace.column("v"), trace.column("s"), sp),
    )


# -------------------------------------------------------- filters and stats


def percentile(data, p: float) -> float:
    """Linear-interpolation percentile over the sorted sample."""
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("percentile of empty data")
    return float(np.percentile(arr, p))


def preprocess(trace: Trace) -> Trace:
    """Drop slow-rolling and relative-velocity-outlier samples.

    Thresholds come from this trace alone, so callers should hand in one
    (driver, mode) segment at a time. Samples with non-finite kinematics
    (replay gaps) are unusable and removed first.
    """
    usable = [
        s
        for s in trace.samples
        if math.isfinite(s.v) and math.isfinite(s.delta_v) and math.isfinite(s.tau)
    ]
    if not usable:
        warnings.warn("preprocess: no usable samples in trace")
        return Trace(samples=[], fingerprint=trace.fingerprint)
    v = np.array([s.v for s in usable])
    dv = np.array([s.delta_v for s in usable])
    v_floor = percentile(v, VELOCITY_FLOOR_PCT)
    dv_low = percentile(dv, RELVEL_LOW_PCT)
    dv_high = percentile(dv, RELVEL_HIGH_PCT)
    kept = [
        s
        for s in usable
        if not (s.v < v_floor or s.delta_v < dv_low or s.delta_v > dv_high)
    ]
    if not kept:
        warnings.warn("preprocess: every sample was filtered out")
    return Trace(samples=kept, fingerprint=trace.fingerprint)


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    std: float
    count: int

    @property
    def abs_mean(self) -> float:
        return abs(self.mean)


def stats(series) -> ErrorStats:
    """Mean and sample (n-1) standard deviation.

    Raises:
        InsufficientDataError: fewer than two samples.
    """
    arr = np.asarray(series, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {arr.size}")
    return ErrorStats(mean=float(arr.mean()), std=float(arr.std(ddof=1)), count=int(arr.size))


def _round_half_away(x: float) -> int:
    # ties go away from zero: 62.5 -> 63, unlike banker's rounding
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def percent_reduction(baseline: float, treatment: float) -> int | None:
    """Integer percent drop from baseline; None when there is no baseline
    to shrink (zero or negative)."""
    if baseline <= 0:
        return None
    return _round_half_away((baseline - treatment) / baseline * 100.0)


def histogram(series, bin_width: float = HIST_BIN_S) -> list[tuple[float, int]]:
    """Fixed-width (bin_left, count) pairs covering the observed range."""
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        return []
    idx = np.floor(arr / bin_width).astype(int)
    lo, hi = int(idx.min()), int(idx.max())
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    return [(i * bin_width, int(c)) for i, c in zip(range(lo, hi + 1), counts)]


# ------------------------------------------------------------------- report


@dataclass(frozen=True)
class ReportRow:
    driver: str
    mode: str
    feedback: str
    tau: ErrorStats
    sgap: ErrorStats
    reduction_mean: int | None = None
    reduction_std: int | None = None


@dataclass
class Report:
    rows: list[ReportRow]
    histograms: dict[tuple[str, str], list[tuple[float, int]]]


def split_modes(trace: Trace) -> list[tuple[tuple[str, FeedbackType], Trace]]:
    """Cut a trace into per-mode segments in order of first appearance."""
    order: list[tuple[str, FeedbackType]] = []
    groups: dict[tuple[str, FeedbackType], list] = {}
    for s in trace.samples:
        key = (s.mode, s.feedback)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s)
    return [(key, Trace(samples=groups[key], fingerprint=trace.fingerprint)) for key in order]


def _mode_stem(label: str) -> str:
    for suffix in _MODE_SUFFIXES:
        if label.endswith(suffix):
            return label[: -len(suffix)]
    return label


def build_report(labeled: Sequence[tuple[str, Trace]]) -> Report:
    """Per-(driver, mode) error statistics with instructed-baseline
    reductions and per-row histograms.

    Velocity-matching segments have no time-gap target and are skipped
    with a warning, as are segments too thin to carry statistics.
    """
    rows: list[ReportRow] = []
    histograms: dict[tuple[str, str], list[tuple[float, int]]] = {}
    baselines: dict[tuple[str, str], ErrorStats] = {}
    mode_order: list[tuple[str, str]] = []

    for driver, trace in labeled:
        for (mode, feedback), segment in split_modes(trace):
            if any(s.set_point is None for s in segment.samples):
                warnings.warn(
                    f"skipping segment {mode!r} for {driver}: velocity matching has no time-gap target"
                )
                continue
            filtered = preprocess(segment)
            if len(filtered) < 2:
                warnings.warn(f"skipping segment {mode!r} for {driver}: not enough samples")
                continue
            eps_tau, eps_s = error_series(filtered)
            row = ReportRow(
                driver=driver,
                mode=mode,
                feedback=feedback.value,
                tau=stats(eps_tau),
                sgap=stats(eps_s),
            )
            rows.append(row)
            histograms[(driver, mode)] = histogram(eps_tau)
            if feedback is FeedbackType.INSTRUCTED:
                baselines[(driver, _mode_stem(mode))] = row.tau
            if (mode, feedback.value) not in mode_order:
                mode_order.append((mode, feedback.value))

    # second pass: reductions against the instructed baseline of the family
    for i, row in enumerate(rows):
        if row.feedback == FeedbackType.INSTRUCTED.value:
            continue
        base = baselines.get((row.driver, _mode_stem(row.mode)))
        if base is None:
            continue
        rows[i] = ReportRow(
            driver=row.driver,
            mode=row.mode,
            feedback=row.feedback,
            tau=row.tau,
            sgap=row.sgap,
            reduction_mean=percent_reduction(base.abs_mean, row.tau.abs_mean),
            reduction_std=percent_reduction(base.std, row.tau.std),
        )

    # population rows: mean of per-driver means and stds, Table-1 style
    for mode, feedback in mode_order:
        group = [r for r in rows if r.mode == mode and r.feedback == feedback]
        if len(group) < 2:
            continue
        red_mean = [r.reduction_mean for r in group if r.reduction_mean is not None]
        red_std = [r.reduction_std for r in group if r.reduction_std is not None]
        rows.append(
            ReportRow(
                driver="Avg",
                mode=mode,
                feedback=feedback,
                tau=ErrorStats(
                    mean=float(np.mean([r.tau.mean for r in group])),
                    std=float(np.mean([r.tau.std for r in group])),
                    count=sum(r.tau.count for r in group),
                ),
                sgap=ErrorStats(
                    mean=float(np.mean([r.sgap.mean for r in group])),
                    std=float(np.mean([r.sgap.std for r in group])),
                    count=sum(r.sgap.count for r in group),
                ),
                reduction_mean=_round_half_away(float(np.mean(red_mean))) if red_mean else None,
                reduction_std=_round_half_away(float(np.mean(red_std))) if red_std else None,
            )
        )
    return Report(rows=rows, histograms=histograms)


REPORT_COLUMNS = (
    "driver",
    "mode",
    "feedback",
    "count",
    "tau_mean",
    "tau_abs_mean",
    "tau_std",
    "sgap_mean",
    "sgap_abs_mean",
    "sgap_std",
    "pct_reduction_mean",
    "pct_reduction_std",
)


def report_csv_text(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in report.rows:
        writer.writerow(
            [
                r.driver,
                r.mode,
                r.feedback,
                r.tau.count,
                repr(r.tau.mean),
                repr(r.tau.abs_mean),
                repr(r.tau.std),
                repr(r.sgap.mean),
                repr(r.sgap.abs_mean),
                repr(r.sgap.std),
                "" if r.reduction_mean is None else r.reduction_mean,
                "" if r.reduction_std is None else r.reduction_std,
            ]
        )
    return buf.getvalue()


def report_table_text(report: Report) -> str:
    """Aligned text table: one line per row, reductions as percents."""
    header = f"{'driver':<10} {'mode':<24} {'feedback':<10} {'n':>6} {'eps_tau mean':>13} {'|mean|':>8} {'std':>8} {'red mean':>9} {'red std':>8}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        rm = "-" if r.reduction_mean is None else f"{r.reduction_mean}%"
        rs = "-" if r.reduction_std is None else f"{r.reduction_std}%"
        lines.append(
            f"{r.driver:<10} {r.mode:<24} {r.feedback:<10} {r.tau.count:>6} "
            f"{r.tau.mean:>13.3f} {r.tau.abs_mean:>8.3f} {r.tau.std:>8.3f} {rm:>9} {rs:>8}"
        )
    return "\n".join(lines) + "\n"
