"""File-only figure rendering for reports. Headless backend, no display."""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import HIST_BIN_S, Report


def filename_slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-") or "x"


def render_report_figures(report: Report, out_dir: Path) -> list[Path]:
    """One error histogram per (driver, mode) plus a reduction summary.

    Returns the paths written, in a stable order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []

    for (driver, mode), bins in report.histograms.items():
        if not bins:
            continue
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        ax.bar(
            [left for left, _ in bins],
            [count for _, count in bins],
            width=HIST_BIN_S,
            align="edge",
            color="#4878a8",
            edgecolor="white",
            linewidth=0.5,
        )
        ax.axvline(0.0, color="#444444", linewidth=0.8)
        ax.set_xlabel("time-gap error (s)")
        ax.set_ylabel("samples")
        ax.set_title(f"{driver} / {mode}")
        fig.tight_layout()
        path = out_dir / f"hist_{filename_slug(driver)}_{filename_slug(mode)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)

    rows = [r for r in report.rows if r.driver != "Avg" and r.reduction_mean is not None]
    if rows:
        fig, ax = plt.subplots(figsize=(7.0, 3.5))
        xs = np.arange(len(rows))
        mean_red = [r.reduction_mean for r in rows]
        std_red = [np.nan if r.reduction_std is None else r.reduction_std for r in rows]
        ax.bar(xs - 0.2, mean_red, width=0.4, label="|mean| reduction", color="#4878a8")
        ax.bar(xs + 0.2, std_red, width=0.4, label="std reduction", color="#b8860b")
        ax.axhline(0.0, color="#444444", linewidth=0.8)
        ax.set_xticks(xs)
        ax.set_xticklabels([f"{r.driver}\n{r.feedback}" for r in rows], fontsize=8)
        ax.set_ylabel("percent reduction vs instructed")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "reductions.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)

    return paths
