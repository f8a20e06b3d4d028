"""Analytic performance metrics of a scenario.

Every public metric returns a :class:`MetricResult`. Failures inside a hop surface
as :class:`EvaluationError` carrying the metric name and, when known, the hop label.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Optional, TypeVar

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from hapslink.link import (
    EvaluationError,
    HapsLinkError,
    QuadratureError,
    UnsupportedError,
    ValidationError,
)
from hapslink.link.channels import (
    EwChannel,
    ShadowedRicianChannel,
    ew_moment,
    ew_snr_mean,
    pe_params,
    sr_mean,
)
from hapslink.link.scenario import (
    FSO_HOP_LABELS,
    MULTICAST_LABEL,
    UPLINK_LABEL,
    Scenario,
    system_cdf,
)
from hapslink.link.settings import EvalSettings
from hapslink.link.specfun import (
    MeijerGSpec,
    SeriesSum,
    binomial_real,
    log_gamma,
    meijer_g_scaled,
    sum_series,
)
from hapslink.link.units import db_to_linear

if TYPE_CHECKING:
    from hapslink.link.montecarlo import McConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Method(str, Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class MetricResult:
    value: float
    method: Method
    terms_used: Optional[int] = None
    samples_used: Optional[int] = None
    ci_halfwidth: Optional[float] = None
    reliable: bool = True
    details: dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if math.isnan(self.value) or self.value < 0.0:
            raise ValidationError(f"metric value must be non-negative, got {self.value}")


@dataclass(frozen=True)
class ModulationScheme:
    """Coherent/non-coherent binary scheme with conditional BEP Γ(u, vγ)/(2Γ(u))."""

    name: str
    u: float
    v: float

    @classmethod
    def from_name(cls, name: str) -> "ModulationScheme":
        try:
            return MODULATIONS[name.upper()]
        except KeyError:
            raise ValidationError(
                f"unknown modulation {name!r}; expected one of {sorted(MODULATIONS)}"
            ) from None


MODULATIONS: dict[str, ModulationScheme] = {
    "CBFSK": ModulationScheme("CBFSK", 0.5, 0.5),
    "CBPSK": ModulationScheme("CBPSK", 0.5, 1.0),
    "NBFSK": ModulationScheme("NBFSK", 1.0, 0.5),
    "DBPSK": ModulationScheme("DBPSK", 1.0, 1.0),
}


def _evaluate(metric: str, compute: Callable[[], T]) -> T:
    try:
        return compute()
    except EvaluationError as e:
        if e.metric is None:
            raise EvaluationError(e.detail, metric=metric, hop=e.hop) from e
        raise
    except UnsupportedError:
        raise
    except HapsLinkError as e:
        raise EvaluationError(f"{type(e).__name__}: {e}", metric=metric) from e


# ---------------------------------------------------------------------------
# Outage
# ---------------------------------------------------------------------------


def outage_probability(sc: Scenario, gamma_out_dB: float) -> MetricResult:
    threshold = db_to_linear(gamma_out_dB)
    value = _evaluate("op", lambda: float(system_cdf(sc, threshold)))
    return MetricResult(min(max(value, 0.0), 1.0), Method.CLOSED_FORM)


def rf_asymptotic(ch: ShadowedRicianChannel, gamma: float) -> float:
    """Leading high-SNR CDF term ϑγ/γ̄."""
    return ch.theta * gamma / ch.avg_snr


def fso_asymptotic(ch: EwChannel, gamma: float) -> float:
    """Leading high-SNR CDF term of an optical hop.

    Without pointing loss this is (γ/((ηI^a)²γ̄))^{αβ/2}. With it, the weaker of the
    turbulence exponent αβ and the pointing exponent g² sets the order.
    """
    ab = ch.alpha * ch.beta
    if ch.pointing is None:
        return (gamma / (ch.scale**2 * ch.avg_snr)) ** (ab / 2.0)
    if ch.pointing.boresight > 0.0:
        raise UnsupportedError("asymptotic OP needs zero boresight")
    gain = pe_params(ch.pointing)
    x = math.sqrt(gamma / ch.avg_snr) / (ch.attenuation * gain.a0 * ch.eta)
    if math.isinf(gain.g):
        return x**ab
    g2 = gain.g2
    if g2 > ab:
        return x**ab * g2 / (g2 - ab)
    if g2 < ab:
        return x**g2 * ew_moment(ch.alpha, ch.beta, -g2)
    raise UnsupportedError(f"asymptotic OP is logarithmic when g² = αβ = {ab:.6g}")


def asymptotic_op(sc: Scenario, gamma_out_dB: float) -> MetricResult:
    gamma = db_to_linear(gamma_out_dB)

    def compute() -> dict[str, float]:
        terms = {UPLINK_LABEL: rf_asymptotic(sc.uplink_rf, gamma)}
        for label, hop in zip(FSO_HOP_LABELS[sc.kind], sc.fso_hops):
            try:
                terms[label] = fso_asymptotic(hop, gamma)
            except HapsLinkError as e:
                raise EvaluationError(f"{type(e).__name__}: {e}", hop=label) from e
        terms[MULTICAST_LABEL] = math.prod(rf_asymptotic(u, gamma) for u in sc.downlink_rf_users)
        return terms

    terms = _evaluate("op_asymptotic", compute)
    return MetricResult(sum(terms.values()), Method.CLOSED_FORM, details=terms)


def diversity_order(sc: Scenario) -> float:
    """min(1, αβ/2 per optical hop, N), with g²/2 capping hops that carry pointing loss."""
    orders = [1.0, float(sc.n_users)]
    for hop in sc.fso_hops:
        orders.append(hop.alpha * hop.beta / 2.0)
        if hop.pointing is not None:
            g = pe_params(hop.pointing).g
            if math.isfinite(g):
                orders.append(g * g / 2.0)
    return min(orders)


# ---------------------------------------------------------------------------
# Bit error rate
# ---------------------------------------------------------------------------

_BER_TAIL_EFOLDS = 50.0
_BER_ABS_TOL = 1e-9


def ber_quadrature(sc: Scenario, mod: ModulationScheme) -> MetricResult:
    """P_e = v^u/(2Γ(u)) ∫ γ^{u−1} e^{−vγ} F(γ) dγ, integrated in t = √γ."""
    u, v = mod.u, mod.v
    prefactor = math.exp(u * math.log(v) - log_gamma(u)) / 2.0
    upper = math.sqrt(_BER_TAIL_EFOLDS / v)

    def integrand(t: float) -> float:
        if t == 0.0:
            return 0.0
        gamma = t * t
        return 2.0 * t ** (2.0 * u - 1.0) * math.exp(-v * gamma) * float(system_cdf(sc, gamma))

    snrs = [sc.uplink_rf.avg_snr, *(h.avg_snr for h in sc.fso_hops)]
    snrs += [user.avg_snr for user in sc.downlink_rf_users]
    points = sorted(
        {math.sqrt(k * s) for s in snrs for k in (1e-3, 1e-2, 1e-1, 1.0) if math.sqrt(k * s) < upper}
    )

    def compute() -> float:
        value, abserr = integrate.quad(
            integrand, 0.0, upper, epsabs=0.1 * _BER_ABS_TOL, epsrel=1e-10, limit=500,
            points=points or None,
        )
        if prefactor * abserr > _BER_ABS_TOL:
            raise QuadratureError(f"BER integral error {prefactor * abserr:.3e} above tolerance")
        return prefactor * value

    value = _evaluate("ber", compute)
    return MetricResult(min(max(value, 0.0), 0.5), Method.QUADRATURE)


def supports_ber_closed_form(sc: Scenario) -> Optional[str]:
    """None when the closed form applies, else the reason it does not."""
    first = sc.downlink_rf_users[0]
    if any(user != first for user in sc.downlink_rf_users):
        return "multicast users must share one channel"
    betas = {hop.beta for hop in sc.fso_hops}
    if len(betas) != 1:
        return "optical hops must share one beta"
    beta = betas.pop()
    if abs(beta - round(beta)) > 1e-9 or round(beta) < 1:
        return f"beta={beta:.6g} is not a positive integer"
    if any(hop.pointing is not None for hop in sc.fso_hops):
        return "pointing error is not covered by the closed form"
    return None


@lru_cache(maxsize=65_536)
def log_ber_kernel(w: float, a: float, omega: float, beta: int, rtol: float = 1e-9) -> float:
    """log ∫₀^∞ γ^{w−1} e^{−aγ} e^{−ωγ^{β/2}} dγ through G^{2,β}_{β,2}."""
    if omega == 0.0:
        return log_gamma(w) - w * math.log(a)
    z = omega**2 * beta**beta / (4.0 * a**beta)
    log_scale, value = meijer_g_scaled(MeijerGSpec.ber_kernel(beta, w, z), rtol=rtol)
    if value <= 0.0:
        raise QuadratureError(f"BER kernel contour returned non-positive value at w={w:g}, z={z:.3e}")
    prefactor = (
        0.5 * math.log(2.0)
        + (w - 0.5) * math.log(beta)
        - w * math.log(a)
        - 0.5 * beta * math.log(2.0 * math.pi)
    )
    return prefactor + log_scale + math.log(value)


def _fso_kappa(hop: EwChannel) -> float:
    return (1.0 / (hop.scale**2 * hop.avg_snr)) ** (hop.beta / 2.0)


def ber_closed_form(sc: Scenario, mod: ModulationScheme) -> MetricResult:
    """Series form of the BER for N identical users.

    P_e = 1/2 − v^u/(2Γ(u)) Σ_j C(N,j)(−1)^{j+1} ∫ γ^{u−1} e^{−vγ} S_G(γ) S_D(γ)^j Π S_fso(γ) dγ,
    with the shadowed-Rician survivals expanded as polynomials times exponentials and
    the optical survivals as binomial series, leaving Meijer-G kernels per term.
    """
    reason = supports_ber_closed_form(sc)
    if reason is not None:
        raise UnsupportedError(f"BER closed form unavailable: {reason}")
    settings = sc.settings
    beta = int(round(sc.fso_hops[0].beta))
    u, v = mod.u, mod.v
    log_prefactor = u * math.log(v) - log_gamma(u) - math.log(2.0)
    uplink, user = sc.uplink_rf, sc.downlink_rf_users[0]
    kappas = [_fso_kappa(hop) for hop in sc.fso_hops]
    alphas = [hop.alpha for hop in sc.fso_hops]
    terms_used = 0

    def fso_weight(rho: int, alpha: float) -> float:
        return binomial_real(alpha, rho) * (-1.0) ** (rho + 1)

    def polynomial_integral(coeffs: np.ndarray, a: float, omega: float) -> float:
        total = 0.0
        for w, q in enumerate(coeffs):
            if q == 0.0:
                continue
            log_term = math.log(abs(q)) + log_prefactor
            log_term += log_ber_kernel(u + w, a, omega, beta, settings.meijer_rtol)
            total += math.copysign(math.exp(log_term), q)
        return total

    def series_over_hops(coeffs: np.ndarray, a: float) -> float:
        nonlocal terms_used

        def outer(rho1: int) -> float:
            nonlocal terms_used
            weight1 = fso_weight(rho1, alphas[0])
            if weight1 == 0.0:
                return 0.0
            if len(kappas) == 1:
                terms_used += 1
                return weight1 * polynomial_integral(coeffs, a, rho1 * kappas[0])

            def inner(rho2: int) -> float:
                nonlocal terms_used
                weight2 = fso_weight(rho2, alphas[1])
                if weight2 == 0.0:
                    return 0.0
                terms_used += 1
                omega = rho1 * kappas[0] + rho2 * kappas[1]
                return weight2 * polynomial_integral(coeffs, a, omega)

            return weight1 * _checked_series(inner, settings, "inner optical").value

        return _checked_series(outer, settings, "outer optical").value

    def compute() -> float:
        total = 0.0
        for j in range(1, sc.n_users + 1):
            coeffs = P.polymul(uplink.survival_coefficients, P.polypow(user.survival_coefficients, j))
            a = v + uplink.psi + j * user.psi
            sign = 1.0 if j % 2 == 1 else -1.0
            total += sign * math.comb(sc.n_users, j) * series_over_hops(np.asarray(coeffs), a)
        return 0.5 - total

    value = _evaluate("ber", compute)
    logger.debug(f"BER closed form {mod.name}: {value:.6e} from {terms_used} optical terms")
    return MetricResult(min(max(value, 0.0), 0.5), Method.CLOSED_FORM, terms_used=terms_used)


def _checked_series(
    term: Callable[[int], float], settings: EvalSettings, what: str
) -> SeriesSum:
    summed = sum_series(term, max_terms=settings.max_terms, rtol=settings.series_rtol, start=1)
    if not summed.converged and abs(summed.last_term) > settings.truncation_tol:
        raise EvaluationError(
            f"{what} BER series not converged after {summed.terms_used} terms "
            f"(last term {summed.last_term:.3e})",
            metric="ber",
        )
    return summed


# ---------------------------------------------------------------------------
# Capacity and energy efficiency
# ---------------------------------------------------------------------------


def hop_means(sc: Scenario) -> dict[str, float]:
    """Average SNR per stage; the multicast stage takes the best user's mean."""
    means = {UPLINK_LABEL: sr_mean(sc.uplink_rf)}
    for label, hop in zip(FSO_HOP_LABELS[sc.kind], sc.fso_hops):
        try:
            means[label] = ew_snr_mean(hop, sc.settings)
        except HapsLinkError as e:
            raise EvaluationError(f"{type(e).__name__}: {e}", hop=label) from e
    means[MULTICAST_LABEL] = max(sr_mean(user) for user in sc.downlink_rf_users)
    return means


def ergodic_capacity_ub(sc: Scenario) -> MetricResult:
    """(1/n) log₂(1 + min stage mean SNR), bits/s/Hz."""
    means = _evaluate("capacity_ub", lambda: hop_means(sc))
    value = math.log2(1.0 + min(means.values())) / sc.slots
    return MetricResult(value, Method.CLOSED_FORM, details=means)


def energy_efficiency(sc: Scenario, capacity: Optional[MetricResult] = None) -> MetricResult:
    """Capacity upper bound over the per-slot average transmit power, bits/Hz/J."""
    if sc.powers is None:
        raise EvaluationError("scenario has no node powers", metric="ee")
    try:
        total_power = sc.powers.total(sc.kind)
    except ValidationError as e:
        raise EvaluationError(str(e), metric="ee") from e
    if total_power <= 0.0:
        raise EvaluationError("total transmit power is zero", metric="ee")
    bound = capacity if capacity is not None else ergodic_capacity_ub(sc)
    average_power = total_power / sc.slots
    return MetricResult(
        bound.value / average_power,
        Method.CLOSED_FORM,
        details={"capacity_ub": bound.value, "average_power_W": average_power},
    )


def spectral_efficiency_mc(sc: Scenario, cfg: "McConfig") -> MetricResult:
    """Exact ergodic capacity by simulation; see :func:`hapslink.link.montecarlo.mc_capacity`."""
    from hapslink.link.montecarlo import mc_capacity

    return mc_capacity(sc, cfg)
