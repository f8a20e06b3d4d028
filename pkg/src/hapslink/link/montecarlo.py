"""Seeded Monte Carlo estimates over full channel chains.

Samples are split across ``workers`` fixed-size shares. Worker ``i`` draws from its own
``numpy`` generator spawned from the master seed, so the estimate depends only on
(master_seed, samples, workers) and never on thread scheduling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import special, stats

from hapslink.link import ValidationError
from hapslink.link.metrics import Method, MetricResult, ModulationScheme
from hapslink.link.scenario import Scenario, system_sample
from hapslink.link.units import db_to_linear

logger = logging.getLogger(__name__)

MIN_SAMPLES = 1_000
# Below this the binomial CI is too coarse to trust.
RELIABLE_PROBABILITY = 1e-6

Sampler = Callable[[np.random.Generator, int], NDArray[np.float64]]
Statistic = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class McConfig:
    samples: int = 1_000_000
    master_seed: int = 0
    workers: int = 1
    ci_level: float = 0.95
    batch_size: int = 1_000_000
    stream: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.samples < MIN_SAMPLES:
            raise ValidationError(f"samples must be >= {MIN_SAMPLES}, got {self.samples}")
        if not (0 <= self.master_seed < 2**64):
            raise ValidationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if not (0.0 < self.ci_level < 1.0):
            raise ValidationError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}")

    def for_point(self, index: int) -> "McConfig":
        """Independent stream for sweep point ``index``."""
        return replace(self, stream=(*self.stream, index))

    def seed_sequence(self) -> np.random.SeedSequence:
        if self.stream:
            return np.random.SeedSequence([self.master_seed, *self.stream])
        return np.random.SeedSequence(self.master_seed)

    def shares(self) -> list[int]:
        base, remainder = divmod(self.samples, self.workers)
        return [base + (1 if i < remainder else 0) for i in range(self.workers)]

    @property
    def z(self) -> float:
        return float(stats.norm.ppf(0.5 + self.ci_level / 2.0))


@dataclass(frozen=True)
class McSummary:
    """Sufficient statistics of one simulated statistic."""

    count: int
    total: float
    total_sq: float

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return max(self.total_sq - self.count * self.mean**2, 0.0) / (self.count - 1)

    def __add__(self, other: "McSummary") -> "McSummary":
        return McSummary(
            self.count + other.count, self.total + other.total, self.total_sq + other.total_sq
        )


def _run_share(
    sampler: Sampler, statistic: Statistic, seed: np.random.SeedSequence, size: int, batch: int
) -> McSummary:
    rng = np.random.default_rng(seed)
    summary = McSummary(0, 0.0, 0.0)
    remaining = size
    while remaining > 0:
        n = min(batch, remaining)
        values = statistic(sampler(rng, n))
        summary = summary + McSummary(n, float(np.sum(values)), float(np.sum(values * values)))
        remaining -= n
    return summary


def simulate_statistic(sampler: Sampler, statistic: Statistic, cfg: McConfig) -> McSummary:
    """Reduce ``statistic(sampler(...))`` over all workers in worker order."""
    seeds = cfg.seed_sequence().spawn(cfg.workers)
    shares = cfg.shares()
    if cfg.workers == 1:
        return _run_share(sampler, statistic, seeds[0], shares[0], cfg.batch_size)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        parts = list(
            pool.map(
                lambda job: _run_share(sampler, statistic, job[0], job[1], cfg.batch_size),
                zip(seeds, shares),
            )
        )
    summary = McSummary(0, 0.0, 0.0)
    for part in parts:
        summary = summary + part
    return summary


def _system_sampler(sc: Scenario) -> Sampler:
    def sampler(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return np.asarray(system_sample(sc, rng, size))

    return sampler


def _mean_result(summary: McSummary, cfg: McConfig) -> MetricResult:
    halfwidth = cfg.z * math.sqrt(summary.variance / summary.count)
    return MetricResult(
        max(summary.mean, 0.0),
        Method.MONTE_CARLO,
        samples_used=summary.count,
        ci_halfwidth=halfwidth,
    )


def mc_outage(sc: Scenario, gamma_out_dB: float, cfg: McConfig) -> MetricResult:
    threshold = db_to_linear(gamma_out_dB)
    summary = simulate_statistic(
        _system_sampler(sc), lambda g: (g <= threshold).astype(np.float64), cfg
    )
    p = summary.mean
    halfwidth = cfg.z * math.sqrt(p * (1.0 - p) / summary.count)
    reliable = p >= RELIABLE_PROBABILITY
    if not reliable:
        logger.warning(
            f"MC outage estimate {p:.3e} from {summary.count} samples is below "
            f"{RELIABLE_PROBABILITY:g}; flagged unreliable"
        )
    return MetricResult(
        min(max(p, 0.0), 1.0),
        Method.MONTE_CARLO,
        samples_used=summary.count,
        ci_halfwidth=halfwidth,
        reliable=reliable,
    )


def conditional_bep(mod: ModulationScheme, gamma: NDArray[np.float64]) -> NDArray[np.float64]:
    """Γ(u, vγ)/(2Γ(u))."""
    return 0.5 * special.gammaincc(mod.u, mod.v * gamma)


def mc_ber(sc: Scenario, mod: ModulationScheme, cfg: McConfig) -> MetricResult:
    summary = simulate_statistic(_system_sampler(sc), lambda g: conditional_bep(mod, g), cfg)
    return _mean_result(summary, cfg)


def mc_capacity(sc: Scenario, cfg: McConfig) -> MetricResult:
    """(1/n) E[log₂(1 + γ₀)]."""
    slots = sc.slots
    summary = simulate_statistic(_system_sampler(sc), lambda g: np.log2(1.0 + g) / slots, cfg)
    return _mean_result(summary, cfg)
