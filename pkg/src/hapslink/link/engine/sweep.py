import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from hapslink.link import ValidationError
from hapslink.link.config import METRIC_NAMES, SweepSection
from hapslink.link.montecarlo import McConfig

SWEEP_VARIABLES = (
    "avg_snr_per_hop_dB",
    "P_G_dBm",
    "aperture_diameter",
    "haps_distance_km",
    "n_users",
)

# Metrics that need Monte Carlo samples to produce any column at all
MC_ONLY_METRICS = ("capacity",)


@dataclass(frozen=True)
class SweepSpec:
    """Which variable moves, over which grid, and which metrics each point reports."""

    variable: str
    start: float
    stop: float
    step: float
    metrics: tuple[str, ...]
    mc: Optional[McConfig] = None

    def __post_init__(self) -> None:
        if self.variable not in SWEEP_VARIABLES:
            raise ValidationError(
                f"unknown sweep variable {self.variable!r}; expected one of {list(SWEEP_VARIABLES)}"
            )
        if not self.start < self.stop:
            raise ValidationError(f"sweep start {self.start} must be below stop {self.stop}")
        if not self.step > 0.0:
            raise ValidationError(f"sweep step must be positive, got {self.step}")
        if not self.metrics:
            raise ValidationError("a sweep needs at least one metric")
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise ValidationError(f"unknown metrics {unknown}; expected a subset of {list(METRIC_NAMES)}")

    def points(self) -> list[float]:
        """Grid from start to stop inclusive; stop is kept when it lies on the grid."""
        count = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        grid = self.start + self.step * np.arange(count, dtype=np.float64)
        return [float(x) for x in grid]

    @classmethod
    def from_config(cls, section: SweepSection) -> "SweepSpec":
        mc = None
        if section.mc:
            mc = McConfig(
                samples=section.samples,
                master_seed=section.seed,
                workers=section.workers,
                ci_level=section.ci_level,
            )
        return cls(
            variable=section.variable,
            start=section.start,
            stop=section.stop,
            step=section.step,
            metrics=tuple(section.metrics),
            mc=mc,
        )

    def with_overrides(
        self,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
        workers: Optional[int] = None,
        no_mc: bool = False,
        metrics: Optional[Sequence[str]] = None,
    ) -> "SweepSpec":
        """Command-line overrides applied on top of the ``[sweep]`` section.

        ``seed``, ``samples`` or ``workers`` switch Monte Carlo on when the file left
        it off; ``no_mc`` wins over all of them.
        """
        spec = self
        if metrics is not None:
            spec = replace(spec, metrics=tuple(metrics))
        if no_mc:
            return replace(spec, mc=None)
        changes = {
            key: value
            for key, value in (("master_seed", seed), ("samples", samples), ("workers", workers))
            if value is not None
        }
        if changes:
            spec = replace(spec, mc=replace(spec.mc or McConfig(), **changes))
        return spec
