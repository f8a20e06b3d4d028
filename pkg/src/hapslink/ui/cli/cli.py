"""Batch front end: ``hapslink --config FILE --output CSV``.

Exit status is 0 on success, 1 when any metric fails at any sweep point (the CSV
is then not written) and 2 when the configuration is invalid.
"""

import argparse
import asyncio
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.markup import escape

from hapslink.bootstrap import ApplicationBootstrap, ApplicationConfig
from hapslink.link import ConfigError, ValidationError
from hapslink.link.config import HapsConfig, load_config
from hapslink.link.engine.engine import (
    MetricFailedEvent,
    PointEvaluatedEvent,
    RunSweepCommand,
    SweepFinishedEvent,
    SweepStartedEvent,
    check_sweep,
)
from hapslink.link.engine.sweep import SweepSpec
from hapslink.messages.commands import CommandResult
from hapslink.observability.events import LogLevel
from hapslink.ui.cli.components import FailureComponent, SummaryTableComponent, SweepProgress

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_EVALUATION = 1
EXIT_CONFIG = 2


def _metric_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hapslink",
        description="Sweep outage, BER, capacity and energy-efficiency metrics of a "
        "HAPS-assisted RF/FSO multicast relay chain and write them as CSV.",
    )
    parser.add_argument("--config", required=True, type=Path, help="scenario INI file")
    parser.add_argument("--output", required=True, type=Path, help="CSV file to write")
    parser.add_argument("--seed", type=int, help="Monte Carlo master seed (overrides [sweep].seed)")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples per point")
    parser.add_argument("--no-mc", action="store_true", help="skip every Monte Carlo column")
    parser.add_argument(
        "--metric", type=_metric_list, help="comma-separated metrics (overrides [sweep].metrics)"
    )
    parser.add_argument("--workers", type=int, help="Monte Carlo worker threads")
    parser.add_argument(
        "--log-level",
        choices=[level.value for level in LogLevel],
        help="Python logging level (default from HAPSLINK_LOG_LEVEL, else warning)",
    )
    parser.add_argument(
        "--events", action="store_true", help="append every bus event to a JSONL log"
    )
    parser.add_argument("--quiet", action="store_true", help="no progress or summary table")
    return parser


def format_cell(value: float) -> str:
    """Plain decimal, switching to scientific notation below 1e-3."""
    if value != 0.0 and abs(value) < 1e-3:
        return f"{value:.9e}"
    return f"{value:.12g}"


def write_csv(table: pd.DataFrame, path: Path) -> None:
    text = table.map(lambda v: format_cell(float(v)))
    path.parent.mkdir(parents=True, exist_ok=True)
    text.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def _app_config(args: argparse.Namespace) -> ApplicationConfig:
    config = ApplicationConfig.from_env()
    if args.log_level:
        config = replace(config, log_level=LogLevel(args.log_level))
    if args.events:
        config = replace(config, enable_file_handler=True)
    # Event summaries are only worth printing when INFO records are shown anyway
    return replace(
        config, enable_console_handler=config.log_level in (LogLevel.DEBUG, LogLevel.INFO)
    )


def _sweep_spec(cfg: HapsConfig, args: argparse.Namespace, app: ApplicationConfig) -> SweepSpec:
    spec = SweepSpec.from_config(cfg.sweep)
    # HAPSLINK_MC_WORKERS only fills in a worker count the file left at its default
    if spec.mc is not None and app.mc_workers is not None and cfg.sweep.workers == 1:
        spec = replace(spec, mc=replace(spec.mc, workers=app.mc_workers))
    return spec.with_overrides(
        seed=args.seed,
        samples=args.samples,
        workers=args.workers,
        no_mc=args.no_mc,
        metrics=args.metric,
    )


async def run_sweep(
    app: ApplicationConfig,
    cfg: HapsConfig,
    spec: SweepSpec,
    console: Console,
    quiet: bool = False,
) -> tuple[CommandResult, list[MetricFailedEvent]]:
    """Execute the sweep on a fresh bus session and collect its failures."""
    bootstrap: ApplicationBootstrap[ApplicationConfig] = ApplicationBootstrap(app)
    await bootstrap.bootstrap()
    progress = SweepProgress(console)
    try:
        async with bootstrap.create_session() as session:
            session.register_event_handler(MetricFailedEvent, progress.on_failed)
            if not quiet:
                session.register_event_handler(SweepStartedEvent, progress.on_started)
                session.register_event_handler(PointEvaluatedEvent, progress.on_point)
                session.register_event_handler(SweepFinishedEvent, progress.on_finished)
            result = await session.execute_with_session(RunSweepCommand(config=cfg, sweep=spec))
    finally:
        progress.stop()
        await bootstrap.shutdown()
    return result, progress.failures


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    console = Console(stderr=True)
    try:
        app = _app_config(args)
    except ValueError as e:
        console.print(f"[bold red]environment error:[/bold red] {escape(str(e))}")
        return EXIT_CONFIG

    try:
        cfg = load_config(args.config)
        spec = _sweep_spec(cfg, args, app)
        check_sweep(cfg, spec)
    except ConfigError as e:
        console.print(f"[bold red]config error:[/bold red] {escape(str(e))}")
        return EXIT_CONFIG
    except ValidationError as e:
        message = escape(f"{args.config}: [sweep] {e}")
        console.print(f"[bold red]config error:[/bold red] {message}")
        return EXIT_CONFIG

    result, failures = asyncio.run(run_sweep(app, cfg, spec, console, quiet=args.quiet))
    if not result.success:
        for event in failures:
            FailureComponent(event).render(console)
        console.print(f"[bold red]evaluation failed:[/bold red] {escape(result.error or '')}")
        console.print(f"{args.output} was not written")
        return EXIT_EVALUATION

    table: pd.DataFrame = result.result
    write_csv(table, args.output)
    if not args.quiet:
        SummaryTableComponent(table, title=f"{args.config.name} ({spec.variable})").render(console)
        console.print(f"Wrote {len(table)} rows to {args.output}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
