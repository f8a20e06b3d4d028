"""End-to-end DF multicast chains.

A scenario is an ordered list of hop stages: the ground-to-HAPS RF uplink, one or two
optical hops, and the multicast RF stage where the best of N users is picked. The
system SNR is the minimum over stages, so its CDF is one minus the product of the
stage survivals.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hapslink.link import EvaluationError, HapsLinkError, ValidationError
from hapslink.link.channels import (
    EwChannel,
    ShadowedRicianChannel,
    Values,
    ew_cdf_series,
    ew_cdf_snr,
    ew_pe_cdf_snr,
    ew_snr_sample,
    sr_cdf,
    sr_sample,
    sr_survival,
)
from hapslink.link.settings import DEFAULT_SETTINGS, EvalSettings

logger = logging.getLogger(__name__)

Channel = Union[ShadowedRicianChannel, EwChannel]


class ScenarioKind(str, Enum):
    S1 = "s1"
    S2 = "s2"


TIME_SLOTS = {ScenarioKind.S1: 3, ScenarioKind.S2: 4}
FSO_HOP_LABELS = {ScenarioKind.S1: ("H1-H2",), ScenarioKind.S2: ("H1-S", "S-H2")}
UPLINK_LABEL = "G-H1"
MULTICAST_LABEL = "H2-D"


@dataclass(frozen=True)
class NodePowers:
    """Transmit powers in watts; ``P_S`` only exists on the satellite-relayed chain."""

    P_G: float
    P_H1: float
    P_H2: float
    P_S: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("P_G", "P_H1", "P_H2", "P_S"):
            value = getattr(self, name)
            if value is not None and not value >= 0.0:
                raise ValidationError(f"power {name} must be non-negative, got {value}")

    def total(self, kind: ScenarioKind) -> float:
        total = self.P_G + self.P_H1 + self.P_H2
        if kind is ScenarioKind.S2:
            if self.P_S is None:
                raise ValidationError("satellite power P_S is required for an s2 scenario")
            total += self.P_S
        return total


@dataclass(frozen=True)
class HopStage:
    label: str
    channels: Tuple[Channel, ...]
    multicast: bool = False


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    uplink_rf: ShadowedRicianChannel
    fso_hops: Tuple[EwChannel, ...]
    downlink_rf_users: Tuple[ShadowedRicianChannel, ...]
    time_slots: Optional[int] = None
    powers: Optional[NodePowers] = None
    settings: EvalSettings = field(default=DEFAULT_SETTINGS, compare=False)

    def __post_init__(self) -> None:
        kind = ScenarioKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "fso_hops", tuple(self.fso_hops))
        object.__setattr__(self, "downlink_rf_users", tuple(self.downlink_rf_users))
        expected_slots = TIME_SLOTS[kind]
        if self.time_slots is None:
            object.__setattr__(self, "time_slots", expected_slots)
        elif self.time_slots != expected_slots:
            raise ValidationError(
                f"{kind.value} uses {expected_slots} time slots, got time_slots={self.time_slots}"
            )
        expected_hops = len(FSO_HOP_LABELS[kind])
        if len(self.fso_hops) != expected_hops:
            raise ValidationError(
                f"{kind.value} needs {expected_hops} optical hop(s), got {len(self.fso_hops)}"
            )
        if not self.downlink_rf_users:
            raise ValidationError("the multicast stage needs at least one user")

    @property
    def n_users(self) -> int:
        return len(self.downlink_rf_users)

    @property
    def slots(self) -> int:
        assert self.time_slots is not None
        return self.time_slots

    def stages(self) -> Iterator[HopStage]:
        yield HopStage(UPLINK_LABEL, (self.uplink_rf,))
        for label, hop in zip(FSO_HOP_LABELS[self.kind], self.fso_hops):
            yield HopStage(label, (hop,))
        yield HopStage(MULTICAST_LABEL, self.downlink_rf_users, multicast=True)

    def with_avg_snr(self, avg_snr: float) -> "Scenario":
        """Same chain with every hop and every user at the given linear average SNR."""
        return replace(
            self,
            uplink_rf=self.uplink_rf.with_avg_snr(avg_snr),
            fso_hops=tuple(hop.with_avg_snr(avg_snr) for hop in self.fso_hops),
            downlink_rf_users=tuple(u.with_avg_snr(avg_snr) for u in self.downlink_rf_users),
        )

    def with_users(self, n_users: int) -> "Scenario":
        """N copies of the first user's channel on the multicast stage."""
        if n_users < 1:
            raise ValidationError(f"n_users must be >= 1, got {n_users}")
        return replace(self, downlink_rf_users=(self.downlink_rf_users[0],) * n_users)


def multicast_cdf(
    users: Sequence[ShadowedRicianChannel], gamma: ArrayLike
) -> Values:
    """CDF of the best user's SNR: Π_i F_i(γ)."""
    if not users:
        raise ValidationError("multicast stage needs at least one user")
    result = np.ones_like(np.asarray(gamma, dtype=np.float64))
    for user in users:
        result = result * np.asarray(sr_cdf(user, gamma))
    return float(result) if result.ndim == 0 else result


def _single_cdf(channel: Channel, gamma: ArrayLike, settings: EvalSettings) -> Values:
    if isinstance(channel, ShadowedRicianChannel):
        return sr_cdf(channel, gamma)
    return ew_cdf_snr(channel, gamma, settings)


def _series_cdf(channel: EwChannel, gamma: float, settings: EvalSettings) -> float:
    return ew_cdf_series(channel, gamma, settings).value


def _guarded(stage: HopStage, evaluate: Callable[[], Values]) -> Values:
    try:
        return evaluate()
    except EvaluationError:
        raise
    except HapsLinkError as e:
        raise EvaluationError(f"{type(e).__name__}: {e}", hop=stage.label) from e


def hop_cdf(
    stage: HopStage, gamma: ArrayLike, settings: EvalSettings = DEFAULT_SETTINGS
) -> Values:
    if stage.multicast:
        users = [c for c in stage.channels if isinstance(c, ShadowedRicianChannel)]
        return _guarded(stage, lambda: multicast_cdf(users, gamma))
    return _guarded(stage, lambda: _single_cdf(stage.channels[0], gamma, settings))


def hop_survival(
    stage: HopStage, gamma: ArrayLike, settings: EvalSettings = DEFAULT_SETTINGS
) -> Values:
    channel = stage.channels[0]
    if not stage.multicast and isinstance(channel, ShadowedRicianChannel):
        return sr_survival(channel, gamma)
    survival = 1.0 - np.asarray(hop_cdf(stage, gamma, settings))
    return float(survival) if survival.ndim == 0 else survival


def hop_sample(
    stage: HopStage, rng: np.random.Generator, size: int
) -> NDArray[np.float64]:
    draws = []
    for channel in stage.channels:
        if isinstance(channel, ShadowedRicianChannel):
            draws.append(np.asarray(sr_sample(channel, rng, size)))
        else:
            draws.append(np.asarray(ew_snr_sample(channel, rng, size)))
    if stage.multicast:
        return np.max(np.vstack(draws), axis=0)
    return draws[0]


def system_cdf_terms(sc: Scenario, gamma: ArrayLike) -> dict[str, Values]:
    """Per-stage CDFs at γ, keyed by hop label."""
    return {stage.label: hop_cdf(stage, gamma, sc.settings) for stage in sc.stages()}


def system_cdf(sc: Scenario, gamma: ArrayLike) -> Values:
    """1 − Π_stages (1 − F_stage(γ))."""
    log_survival: NDArray[np.float64] = np.zeros_like(np.asarray(gamma, dtype=np.float64))
    with np.errstate(divide="ignore"):
        for cdf in system_cdf_terms(sc, gamma).values():
            log_survival = log_survival + np.log1p(-np.clip(np.asarray(cdf), 0.0, 1.0))
    result = np.clip(-np.expm1(log_survival), 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def system_sample(
    sc: Scenario, rng: np.random.Generator, size: Optional[int] = None
) -> Values:
    """Draw every stage independently and keep the weakest."""
    count = 1 if size is None else size
    gamma0 = np.full(count, np.inf)
    for stage in sc.stages():
        gamma0 = np.minimum(gamma0, hop_sample(stage, rng, count))
    return gamma0 if size is not None else float(gamma0[0])


def outage_expanded(sc: Scenario, gamma: float) -> float:
    """Explicit survival-product form of the outage probability at one threshold.

    RF stages use the finite shadowed-Rician sums, optical stages the binomial series
    (or the Meijer-G series over the pointing law), and the multicast stage the
    product of per-user CDFs.
    """
    if gamma < 0.0:
        raise ValidationError(f"threshold must be non-negative, got {gamma}")
    settings = sc.settings
    stages = list(sc.stages())
    product = 1.0
    for stage in stages:
        channel = stage.channels[0]
        if stage.multicast:
            users = [c for c in stage.channels if isinstance(c, ShadowedRicianChannel)]
            product *= 1.0 - math.prod(
                1.0 - float(sr_survival(user, gamma)) for user in users
            )
        elif isinstance(channel, ShadowedRicianChannel):
            product *= float(sr_survival(channel, gamma))
        elif channel.pointing is not None:
            meijer = replace(settings, pointing_method="meijer")
            value = _guarded(stage, partial(ew_pe_cdf_snr, channel, gamma, meijer))
            product *= 1.0 - float(value)
        else:
            value = _guarded(stage, partial(_series_cdf, channel, gamma, settings))
            product *= 1.0 - float(value)
    return 1.0 - product
