"""Command-line entry points: simulate, replay, report, serve.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 I/O failure
writing results, 4 requested port unavailable. The CANCOACH_LOG environment
variable ("debug", "info", ...) sets diagnostic verbosity.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import socket
import sys
from pathlib import Path

import click
import yaml

from .analytics import build_report, report_csv_text, report_table_text
from .can_codec import builtin_catalog, load_catalog
from .errors import CanCoachError
from .plots import filename_slug, render_report_figures
from .sim import Trace, load_sim_config, replay, run

EXIT_BAD_CONFIG = 2
EXIT_IO = 3
EXIT_PORT_BUSY = 4

logger = logging.getLogger(__name__)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str):
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        _fail(EXIT_BAD_CONFIG, f"cannot read config: {exc}")
    except yaml.YAMLError as exc:
        _fail(EXIT_BAD_CONFIG, f"config is not valid YAML: {exc}")
    try:
        return load_sim_config(doc)
    except CanCoachError as exc:
        _fail(EXIT_BAD_CONFIG, str(exc))


def _load_catalog_arg(path: str | None):
    if path is None:
        return builtin_catalog()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(EXIT_BAD_CONFIG, f"cannot read catalog: {exc}")
    try:
        return load_catalog(text)
    except CanCoachError as exc:
        _fail(EXIT_BAD_CONFIG, str(exc))


def _write_text(path: str, text: str):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {path}: {exc}")


@click.group()
def main():
    """Vehicle-following coach: simulate runs, replay CAN logs, report errors."""
    level_name = os.environ.get("CANCOACH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))


@main.command()
@click.option("--config", "config_path", required=True, help="Run configuration YAML.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_path", required=True, help="Trace CSV destination.")
def simulate(config_path, seed, out_path):
    """Run a closed-loop schedule and write the trace CSV."""
    cfg = _load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    try:
        trace = run(cfg)
    except CanCoachError as exc:
        _fail(EXIT_BAD_CONFIG, str(exc))
    _write_text(out_path, trace.to_csv_text())
    click.echo(f"wrote {len(trace)} samples to {out_path}")


@main.command(name="replay")
@click.argument("log_path")
@click.option("--catalog", "catalog_path", default=None, help="Catalog YAML (default: built in).")
@click.option("--config", "config_path", default=None, help="Schedule YAML for cue recomputation.")
@click.option("--out", "out_path", required=True, help="Reconstructed trace CSV destination.")
def replay_cmd(log_path, catalog_path, config_path, out_path):
    """Rebuild a trace from a recorded CAN log."""
    catalog = _load_catalog_arg(catalog_path)
    schedule = None
    if config_path is not None:
        schedule = list(_load_config(config_path).schedule)
    try:
        lines = Path(log_path).read_text().splitlines()
    except OSError as exc:
        _fail(EXIT_BAD_CONFIG, f"cannot read log: {exc}")
    try:
        result = replay(lines, catalog, schedule=schedule)
    except CanCoachError as exc:
        _fail(EXIT_BAD_CONFIG, str(exc))
    _write_text(out_path, result.trace.to_csv_text())
    if not result.trace.samples:
        click.echo("warning: no ego-speed frames decoded; trace is empty", err=True)
    if result.skipped_lines:
        click.echo(f"skipped {result.skipped_lines} undecodable lines", err=True)
    if result.no_match_ticks:
        click.echo(f"{result.no_match_ticks} ticks had no lead estimate", err=True)
    click.echo(f"wrote {len(result.trace)} samples to {out_path}")


@main.command()
@click.argument("traces", nargs=-1, required=True, metavar="DRIVER:TRACE_CSV...")
@click.option("--out", "out_dir", default="report_out", help="Output directory.")
def report(traces, out_dir):
    """Summarize labeled traces: CSV + text tables, histograms, figures."""
    labeled = []
    for spec_arg in traces:
        label, sep, path = spec_arg.partition(":")
        if not sep or not label or not path:
            _fail(EXIT_BAD_CONFIG, f"expected DRIVER:TRACE_CSV, got {spec_arg!r}")
        try:
            labeled.append((label, Trace.from_csv(path)))
        except OSError as exc:
            _fail(EXIT_BAD_CONFIG, f"cannot read trace: {exc}")
        except (CanCoachError, ValueError, IndexError) as exc:
            _fail(EXIT_BAD_CONFIG, f"not a trace file ({path}): {exc}")

    rep = build_report(labeled)
    out = Path(out_dir)
    _write_text(out / "report.csv", report_csv_text(rep))
    table = report_table_text(rep)
    _write_text(out / "report.txt", table)
    for (driver, mode), bins in rep.histograms.items():
        lines = ["bin_left,count"] + [f"{left!r},{count}" for left, count in bins]
        _write_text(out / f"hist_{filename_slug(driver)}_{filename_slug(mode)}.csv",
                    "\n".join(lines) + "\n")
    try:
        figures = render_report_figures(rep, out)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write figures: {exc}")
    click.echo(table, nl=False)
    click.echo(f"wrote report.csv, report.txt, {len(rep.histograms)} histogram CSVs, "
               f"{len(figures)} figures to {out}")


@main.command()
@click.option("--config", "config_path", required=True, help="Run configuration YAML.")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_path", default="session_trace.csv", show_default=True,
              help="Trace CSV written when the schedule completes.")
def serve(config_path, port, seed, out_path):
    """Serve the live drive loop over a websocket on localhost."""
    cfg = _load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind(("127.0.0.1", port))
    except OSError:
        _fail(EXIT_PORT_BUSY, f"port {port} is not available")
    finally:
        probe.close()

    import uvicorn

    from .server import create_app

    app = create_app(cfg, trace_out=out_path)
    click.echo(f"serving on ws://127.0.0.1:{port}/ws (trace -> {out_path})")
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
