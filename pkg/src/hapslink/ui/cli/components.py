from abc import ABC, abstractmethod
from typing import Optional

import pandas as pd
from rich.console import Console
from rich.live import Live
from rich.markup import escape
from rich.panel import Panel
from rich.spinner import Spinner
from rich.table import Table

from hapslink.link.engine.engine import (
    MetricFailedEvent,
    PointEvaluatedEvent,
    SweepFinishedEvent,
    SweepStartedEvent,
)
from hapslink.ui.cli.config import CLIConfig


class CLIComponent(ABC):
    @abstractmethod
    def render(self, console: Console) -> None:
        pass


def format_number(value: float, digits: Optional[int] = None) -> str:
    digits = digits or CLIConfig().significant_digits
    if value != 0.0 and abs(value) < 1e-3:
        return f"{value:.{digits - 1}e}"
    return f"{value:.{digits}g}"


class SummaryTableComponent(CLIComponent):
    """The sweep table, one row per point, numbers rounded for reading."""

    def __init__(self, table: pd.DataFrame, title: str = "Sweep results"):
        self.table = table
        self.title = title

    def render(self, console: Console) -> None:
        view = Table(title=self.title, width=min(CLIConfig().max_width, console.width))
        for column in self.table.columns:
            view.add_column(str(column), justify="right")
        for row in self.table.itertuples(index=False):
            view.add_row(*(format_number(float(v)) for v in row))
        console.print(view)


class FailureComponent(CLIComponent):
    """Event must be a MetricFailedEvent."""

    def __init__(self, event: MetricFailedEvent):
        self.event = event

    def render(self, console: Console) -> None:
        where = ", ".join(
            part
            for part in (
                f"metric {self.event.metric}" if self.event.metric else "",
                f"hop {self.event.hop}" if self.event.hop else "",
            )
            if part
        )
        console.print(
            Panel(
                escape(self.event.error),
                title=f"[bold red]Point {self.event.point_index} failed ({where or 'unknown'})[/bold red]",
                title_align="left",
                style="red",
                width=min(CLIConfig().max_width, console.width),
                padding=CLIConfig().padding,
            )
        )


class SweepProgress:
    """Spinner that follows the sweep events of one session."""

    def __init__(self, console: Console):
        self.console = console
        self.spinner: Optional[Spinner] = None
        self.live: Optional[Live] = None
        self.total = 0
        self.done = 0
        self.failures: list[MetricFailedEvent] = []

    async def on_started(self, event: SweepStartedEvent) -> None:
        self.total = event.points
        self.done = 0
        self.spinner = Spinner("point", text=self._status(event.variable))
        self.live = Live(self.spinner, console=self.console, refresh_per_second=10, transient=True)
        self.live.start()

    async def on_point(self, event: PointEvaluatedEvent) -> None:
        self.done += 1
        if self.spinner is not None:
            self.spinner.update(text=self._status(f"{event.variable}={event.value:g}"))

    async def on_failed(self, event: MetricFailedEvent) -> None:
        self.failures.append(event)

    async def on_finished(self, event: SweepFinishedEvent) -> None:
        self.stop()

    def stop(self) -> None:
        if self.live is not None:
            self.live.stop()
            self.live = None

    def _status(self, detail: str) -> str:
        return f"[bold white]Evaluating {self.done}/{self.total} points ({detail})"
