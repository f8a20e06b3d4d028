"""Sweep engine: evaluates every requested metric at every sweep point.

The engine is driven through the message bus. A ``RunSweepCommand`` carries the
validated configuration and the sweep; the engine publishes progress events and
returns the result table in ``CommandResult.result``.
"""

import asyncio
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import pandas as pd

from hapslink.bus.bus import MessageBus
from hapslink.link import EvaluationError, HapsLinkError, UnsupportedError, ValidationError
from hapslink.link.config import HapsConfig, build_scenario, modulation_of
from hapslink.link.engine.sweep import SweepSpec
from hapslink.link.metrics import (
    MetricResult,
    ModulationScheme,
    asymptotic_op,
    ber_closed_form,
    ber_quadrature,
    energy_efficiency,
    ergodic_capacity_ub,
    outage_probability,
    supports_ber_closed_form,
)
from hapslink.link.montecarlo import McConfig, mc_ber, mc_capacity, mc_outage
from hapslink.link.scenario import Scenario
from hapslink.messages.commands import Command, CommandResult
from hapslink.messages.events import Event
from hapslink.observability.events import LogLevel, ObservabilityBaseEvent

logger = logging.getLogger(__name__)


@dataclass
class RunSweepCommand(Command):
    config: Optional[HapsConfig] = None
    sweep: Optional[SweepSpec] = None


@dataclass
class SweepStartedEvent(Event):
    variable: str = ""
    points: int = 0
    metrics: tuple[str, ...] = ()


@dataclass
class PointEvaluatedEvent(Event):
    point_index: int = 0
    variable: str = ""
    value: float = 0.0
    results: dict[str, float] = field(default_factory=dict)


@dataclass
class MetricFailedEvent(Event):
    point_index: int = 0
    value: float = 0.0
    metric: Optional[str] = None
    hop: Optional[str] = None
    error: str = ""


@dataclass
class McUnreliableEvent(ObservabilityBaseEvent):
    point_index: int = 0
    metric: str = ""
    estimate: float = 0.0
    samples: int = 0
    level: LogLevel = LogLevel.WARNING


@dataclass
class SweepFinishedEvent(Event):
    points: int = 0
    columns: tuple[str, ...] = ()
    failures: int = 0
    elapsed: float = 0.0


def column_name(metric: str, result: MetricResult) -> str:
    return f"{metric}:{result.method.value}"


def check_sweep(cfg: HapsConfig, spec: SweepSpec) -> list[Scenario]:
    """Build the scenario of every sweep point up front.

    Raises:
        ConfigError: the sweep moves a variable to a value the configuration cannot take.
    """
    return [build_scenario(cfg, spec.variable, value) for value in spec.points()]


@dataclass
class PointOutcome:
    """Everything one sweep point produced, successes and failures alike."""

    index: int
    value: float
    results: dict[str, MetricResult] = field(default_factory=dict)
    failures: list[EvaluationError] = field(default_factory=list)

    @property
    def row(self) -> dict[str, float]:
        return {column: result.value for column, result in self.results.items()}


class PointEvaluator:
    """Evaluates the requested metrics on one scenario.

    Each metric is independent: a failure is recorded against its metric name and
    the remaining metrics still run.
    """

    def __init__(self, spec: SweepSpec, modulation: ModulationScheme, gamma_out_dB: float):
        self.spec = spec
        self.modulation = modulation
        self.gamma_out_dB = gamma_out_dB

    def evaluate(self, index: int, value: float, sc: Scenario) -> PointOutcome:
        outcome = PointOutcome(index=index, value=value)
        mc = self.spec.mc.for_point(index) if self.spec.mc is not None else None
        handlers: dict[str, Callable[[Scenario, Optional[McConfig]], list[MetricResult]]] = {
            "op": self._op,
            "op_asymptotic": self._op_asymptotic,
            "ber": self._ber,
            "capacity": self._capacity,
            "capacity_ub": self._capacity_ub,
            "ee": self._ee,
        }
        for metric in self.spec.metrics:
            try:
                for result in handlers[metric](sc, mc):
                    outcome.results[column_name(metric, result)] = result
            except EvaluationError as e:
                if e.metric is None:
                    e = EvaluationError(e.detail, metric=metric, hop=e.hop)
                outcome.failures.append(e)
            except HapsLinkError as e:
                outcome.failures.append(
                    EvaluationError(f"{type(e).__name__}: {e}", metric=metric)
                )
        return outcome

    def _op(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        results = [outage_probability(sc, self.gamma_out_dB)]
        if mc is not None:
            results.append(mc_outage(sc, self.gamma_out_dB, mc))
        return results

    def _op_asymptotic(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        return [asymptotic_op(sc, self.gamma_out_dB)]

    def _ber(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        results = [ber_quadrature(sc, self.modulation)]
        reason = supports_ber_closed_form(sc)
        if reason is None:
            try:
                results.append(ber_closed_form(sc, self.modulation))
            except UnsupportedError as e:
                logger.info(f"Closed-form BER skipped: {e}")
        else:
            logger.debug(f"Closed-form BER skipped: {reason}")
        if mc is not None:
            results.append(mc_ber(sc, self.modulation, mc))
        return results

    def _capacity(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        if mc is None:
            return []
        return [mc_capacity(sc, mc)]

    def _capacity_ub(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        return [ergodic_capacity_ub(sc)]

    def _ee(self, sc: Scenario, mc: Optional[McConfig]) -> list[MetricResult]:
        return [energy_efficiency(sc)]


class SweepEngine:
    """Runs a sweep over a scenario configuration.

    Points are evaluated concurrently in worker threads, at most ``concurrency`` at
    a time; the table is assembled in sweep order so scheduling never changes it.
    """

    def __init__(self, concurrency: Optional[int] = None) -> None:
        self.bus = MessageBus()
        self.concurrency = concurrency or min(8, os.cpu_count() or 1)

    async def handle_command(self, command: RunSweepCommand) -> CommandResult:
        """Evaluate the sweep and return its table.

        Raises:
            ValidationError: the command lacks a configuration or a sweep.
            EvaluationError: at least one metric failed at some point; every failure
                has already been published as a ``MetricFailedEvent``.
        """
        if command.config is None or command.sweep is None:
            raise ValidationError("RunSweepCommand needs both a config and a sweep")
        table = await self.run(command.config, command.sweep, command.session_id)
        return CommandResult(
            success=True,
            command_id=command.command_id,
            result=table,
            session_id=command.session_id,
        )

    async def run(self, cfg: HapsConfig, spec: SweepSpec, session_id: Any = "ROOT") -> pd.DataFrame:
        started = time.perf_counter()
        points = spec.points()
        if "capacity" in spec.metrics and spec.mc is None:
            logger.warning("capacity needs Monte Carlo; its column is omitted with MC disabled")
        await self.bus.publish(
            SweepStartedEvent(
                variable=spec.variable,
                points=len(points),
                metrics=spec.metrics,
                session_id=session_id,
            )
        )
        evaluator = PointEvaluator(spec, modulation_of(cfg), cfg.scenario.gamma_out_dB)
        limit = asyncio.Semaphore(self.concurrency)

        def evaluate(index: int, value: float) -> PointOutcome:
            sc = build_scenario(cfg, spec.variable, value)
            return evaluator.evaluate(index, value, sc)

        async def run_point(index: int, value: float) -> PointOutcome:
            async with limit:
                outcome = await asyncio.to_thread(evaluate, index, value)
            await self._report(outcome, spec, session_id)
            return outcome

        outcomes = await asyncio.gather(*(run_point(i, x) for i, x in enumerate(points)))
        failures = [f for outcome in outcomes for f in outcome.failures]
        table = self._assemble(spec, outcomes)
        await self.bus.publish(
            SweepFinishedEvent(
                points=len(points),
                columns=tuple(table.columns),
                failures=len(failures),
                elapsed=time.perf_counter() - started,
                session_id=session_id,
            )
        )
        if failures:
            first = failures[0]
            raise EvaluationError(
                f"{len(failures)} evaluation(s) failed; first: {first}",
                metric=first.metric,
                hop=first.hop,
            )
        return table

    async def _report(self, outcome: PointOutcome, spec: SweepSpec, session_id: Any) -> None:
        for failure in outcome.failures:
            logger.error(f"Point {outcome.index} ({spec.variable}={outcome.value:g}): {failure}")
            await self.bus.publish(
                MetricFailedEvent(
                    point_index=outcome.index,
                    value=outcome.value,
                    metric=failure.metric,
                    hop=failure.hop,
                    error=str(failure),
                    session_id=session_id,
                )
            )
        for column, result in outcome.results.items():
            if not result.reliable:
                await self.bus.publish(
                    McUnreliableEvent(
                        point_index=outcome.index,
                        metric=column,
                        estimate=result.value,
                        samples=result.samples_used or 0,
                        message=f"{column} estimate {result.value:.3e} is below the reliable range",
                        session_id=session_id,
                    )
                )
        await self.bus.publish(
            PointEvaluatedEvent(
                point_index=outcome.index,
                variable=spec.variable,
                value=outcome.value,
                results=outcome.row,
                session_id=session_id,
            )
        )

    def _assemble(self, spec: SweepSpec, outcomes: list[PointOutcome]) -> pd.DataFrame:
        columns: list[str] = []
        for outcome in outcomes:
            for column in outcome.results:
                if column not in columns:
                    columns.append(column)
        # A column some points could not produce (closed-form BER outside its domain) is dropped
        partial = [c for c in columns if any(c not in o.results for o in outcomes)]
        for column in partial:
            logger.warning(f"Column {column} is not available at every point; dropped")
        kept = [c for c in columns if c not in partial]
        rows = [{spec.variable: o.value, **{c: o.results[c].value for c in kept}} for o in outcomes]
        return pd.DataFrame(rows, columns=[spec.variable, *kept])
