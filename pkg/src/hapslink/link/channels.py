"""Stochastic channel models for the RF and optical hops.

Every analytic function accepts a scalar or an array of linear SNRs and returns the
same shape. Samplers take the caller's ``numpy.random.Generator``; nothing here holds
random state.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from hapslink.link import ConvergenceError, QuadratureError, UnsupportedError, ValidationError
from hapslink.link.settings import DEFAULT_SETTINGS, EvalSettings
from hapslink.link.specfun import (
    MeijerGSpec,
    SeriesSum,
    binomial_real,
    erf,
    log_bessel_i0,
    log_gamma,
    meijer_g_scaled,
    pochhammer,
    scaled_product,
    sum_series,
)

logger = logging.getLogger(__name__)

Values = Union[float, NDArray[np.float64]]

# Moment series are summed in one vectorised pass of this many terms before falling
# back to quadrature.
_MOMENT_SERIES_TERMS = 20_000
_MOMENT_SERIES_RTOL = 1e-10


def _as_values(values: ArrayLike) -> Tuple[NDArray[np.float64], bool]:
    array = np.asarray(values, dtype=np.float64)
    if np.any(array < 0.0) or np.any(np.isnan(array)):
        raise ValidationError("SNR / irradiance arguments must be non-negative")
    return array, array.ndim == 0


def _finish(result: NDArray[np.float64], scalar: bool) -> Values:
    return float(result) if scalar else result


# ---------------------------------------------------------------------------
# Shadowed-Rician RF fading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShadowingPreset:
    m: int
    b: float
    omega: float


SHADOWING_PRESETS: dict[str, ShadowingPreset] = {
    "heavy": ShadowingPreset(1, 0.063, 8.94e-4),
    "average": ShadowingPreset(10, 0.126, 0.835),
    "light": ShadowingPreset(19, 0.158, 1.29),
}


@dataclass(frozen=True)
class ShadowedRicianChannel:
    """Shadowed-Rician SNR law of one RF link.

    ``m`` must be a positive integer: the CDF is a finite double sum only then.
    """

    m: int
    b: float
    omega: float
    avg_snr: float

    def __post_init__(self) -> None:
        if isinstance(self.m, bool) or not float(self.m).is_integer() or self.m < 1:
            raise ValidationError(f"shadowed-Rician m must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not self.b > 0.0:
            raise ValidationError(f"shadowed-Rician b must be positive, got {self.b}")
        if not self.omega >= 0.0:
            raise ValidationError(f"shadowed-Rician omega must be non-negative, got {self.omega}")
        if not (self.avg_snr > 0.0 and math.isfinite(self.avg_snr)):
            raise ValidationError(f"average SNR must be positive and finite, got {self.avg_snr}")

    @classmethod
    def from_preset(cls, name: str, avg_snr: float) -> "ShadowedRicianChannel":
        try:
            preset = SHADOWING_PRESETS[name]
        except KeyError:
            raise ValidationError(
                f"unknown shadowing preset {name!r}; expected one of {sorted(SHADOWING_PRESETS)}"
            ) from None
        return cls(preset.m, preset.b, preset.omega, avg_snr)

    def with_avg_snr(self, avg_snr: float) -> "ShadowedRicianChannel":
        return replace(self, avg_snr=avg_snr)

    @property
    def theta(self) -> float:
        two_bm = 2.0 * self.b * self.m
        return (1.0 / (2.0 * self.b)) * (two_bm / (two_bm + self.omega)) ** self.m

    @property
    def varsigma(self) -> float:
        return 1.0 / (2.0 * self.b)

    @property
    def delta(self) -> float:
        return self.omega / (2.0 * self.b * (2.0 * self.b * self.m + self.omega))

    @property
    def psi(self) -> float:
        return (self.varsigma - self.delta) / self.avg_snr

    @cached_property
    def pdf_coefficients(self) -> NDArray[np.float64]:
        """a_j with f(γ) = Σ a_j γ^j e^{−ψγ}."""
        g = self.avg_snr
        return np.array(
            [
                self.theta
                * pochhammer(1.0 - self.m, j)
                * (-self.delta) ** j
                / (g ** (j + 1) * math.factorial(j) ** 2)
                for j in range(self.m)
            ]
        )

    @cached_property
    def survival_coefficients(self) -> NDArray[np.float64]:
        """c_q with 1 − F(γ) = Σ c_q γ^q e^{−ψγ}."""
        g, psi = self.avg_snr, self.psi
        coeffs = np.zeros(self.m)
        for order in range(self.m):
            weight = self.theta * pochhammer(1.0 - self.m, order) * (-self.delta) ** order
            weight /= g ** (order + 1) * math.factorial(order)
            for q in range(order + 1):
                coeffs[q] += weight / (math.factorial(q) * psi ** (order - q + 1))
        return coeffs


def sr_pdf(ch: ShadowedRicianChannel, gamma: ArrayLike) -> Values:
    g, scalar = _as_values(gamma)
    result = P.polyval(g, ch.pdf_coefficients) * np.exp(-ch.psi * g)
    return _finish(np.maximum(result, 0.0), scalar)


def sr_survival(ch: ShadowedRicianChannel, gamma: ArrayLike) -> Values:
    g, scalar = _as_values(gamma)
    result = P.polyval(g, ch.survival_coefficients) * np.exp(-ch.psi * g)
    return _finish(np.clip(result, 0.0, 1.0), scalar)


def sr_cdf(ch: ShadowedRicianChannel, gamma: ArrayLike) -> Values:
    g, scalar = _as_values(gamma)
    survival = P.polyval(g, ch.survival_coefficients) * np.exp(-ch.psi * g)
    return _finish(np.clip(1.0 - survival, 0.0, 1.0), scalar)


def sr_sample(
    ch: ShadowedRicianChannel, rng: np.random.Generator, size: Optional[int] = None
) -> Values:
    """γ̄·|A + Z|² with A² ~ Gamma(m, Ω/m) and Z complex Gaussian of variance 2b."""
    los_power = rng.gamma(ch.m, ch.omega / ch.m, size)
    scatter = rng.normal(0.0, math.sqrt(ch.b), (2,) if size is None else (2, size))
    h2 = (np.sqrt(los_power) + scatter[0]) ** 2 + scatter[1] ** 2
    return ch.avg_snr * h2 if size is not None else float(ch.avg_snr * h2)


def sr_mean(ch: ShadowedRicianChannel) -> float:
    """Mean SNR from the finite survival sum: Σ_q c_q q! ψ^{−(q+1)}."""
    return float(
        sum(
            c * math.factorial(q) * ch.psi ** (-(q + 1))
            for q, c in enumerate(ch.survival_coefficients)
        )
    )


def sr_mean_direct(ch: ShadowedRicianChannel) -> float:
    return ch.avg_snr * (2.0 * ch.b + ch.omega)


# ---------------------------------------------------------------------------
# Pointing error
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointingError:
    """Misalignment fading: aperture radius, beam footprint, jitter and boresight, metres.

    The link expressions assume ``boresight = 0``. A non-zero boresight is carried by
    the pdf, moments and sampler only.
    """

    aperture_radius: float
    beam_width_rx: float
    jitter_sigma: float
    boresight: float = 0.0

    def __post_init__(self) -> None:
        for name in ("aperture_radius", "beam_width_rx", "jitter_sigma"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValidationError(f"pointing error {name} must be positive, got {value}")
        if not (self.boresight >= 0.0 and math.isfinite(self.boresight)):
            raise ValidationError(f"pointing error boresight must be non-negative, got {self.boresight}")


@dataclass(frozen=True)
class PointingGain:
    a0: float
    w_eq: float
    g: float

    @property
    def g2(self) -> float:
        return self.g * self.g


def beam_width_at(divergence_rad: float, distance_m: float) -> float:
    """Beam footprint w_z = θ·z at the receiver."""
    if divergence_rad <= 0.0 or distance_m <= 0.0:
        raise ValidationError("beam divergence and distance must be positive")
    return divergence_rad * distance_m


def pe_params(pe: PointingError) -> PointingGain:
    v = math.sqrt(math.pi / 2.0) * pe.aperture_radius / pe.beam_width_rx
    erf_v = erf(v)
    a0 = erf_v**2
    log_weq2 = (
        2.0 * math.log(pe.beam_width_rx)
        + 0.5 * math.log(math.pi)
        + math.log(erf_v)
        + v * v
        - math.log(2.0 * v)
    )
    if log_weq2 > 1400.0:
        return PointingGain(a0, math.inf, math.inf)
    w_eq = math.exp(0.5 * log_weq2)
    return PointingGain(a0, w_eq, w_eq / (2.0 * pe.jitter_sigma))


def pe_pdf(pe: PointingError, x: ArrayLike) -> Values:
    """g² e^{−s²/2σ²}/A₀^{g²}·x^{g²−1}·I₀((s/σ²)√(−w_eq² ln(x/A₀)/2)) on (0, A₀].

    With zero boresight the Bessel factor is one.
    """
    values, scalar = _as_values(x)
    gain = pe_params(pe)
    g2 = gain.g2
    result = np.zeros_like(values)
    inside = (values > 0.0) & (values <= gain.a0)
    log_ratio = np.log(values[inside] / gain.a0)
    logs = math.log(g2) + (g2 - 1.0) * log_ratio - math.log(gain.a0)
    if pe.boresight > 0.0:
        sigma2 = pe.jitter_sigma**2
        radius = np.sqrt(np.maximum(-0.5 * gain.w_eq**2 * log_ratio, 0.0))
        logs += -(pe.boresight**2) / (2.0 * sigma2) + log_bessel_i0(pe.boresight * radius / sigma2)
    result[inside] = np.exp(logs)
    return _finish(result, scalar)


def pe_moment(pe: PointingError, k: float) -> float:
    """E[(I^p)^k] = A₀^k g²/(g²+k)·exp(−2k s²/(w_eq² + 4kσ²))."""
    gain = pe_params(pe)
    if math.isinf(gain.g):
        return gain.a0**k
    moment = gain.a0**k * gain.g2 / (gain.g2 + k)
    if pe.boresight > 0.0:
        moment *= math.exp(
            -2.0 * k * pe.boresight**2 / (gain.w_eq**2 + 4.0 * k * pe.jitter_sigma**2)
        )
    return moment


def pe_sample(pe: PointingError, rng: np.random.Generator, size: Optional[int] = None) -> Values:
    """A₀·exp(−2r²/w_eq²) with r the radial displacement of a Gaussian jitter around s."""
    gain = pe_params(pe)
    if pe.boresight > 0.0:
        offsets = rng.normal(0.0, pe.jitter_sigma, (2,) if size is None else (2, size))
        r = np.hypot(pe.boresight + offsets[0], offsets[1])
    else:
        r = rng.rayleigh(pe.jitter_sigma, size)
    if math.isinf(gain.w_eq):
        draws = np.full_like(np.asarray(r, dtype=np.float64), gain.a0)
    else:
        draws = gain.a0 * np.exp(-2.0 * np.square(r) / gain.w_eq**2)
    return draws if size is not None else float(draws)


# ---------------------------------------------------------------------------
# Exponentiated-Weibull optical fading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EwChannel:
    """EW irradiance law of one optical hop, scaled by I^a and optionally by pointing loss."""

    alpha: float
    beta: float
    eta: float
    attenuation: float = 1.0
    avg_snr: float = 1.0
    pointing: Optional[PointingError] = None

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and self.beta > 0.0 and self.eta > 0.0):
            raise ValidationError(
                f"EW parameters must be positive, got alpha={self.alpha}, beta={self.beta}, "
                f"eta={self.eta}"
            )
        if not (0.0 < self.attenuation <= 1.0):
            raise ValidationError(f"attenuation must lie in (0, 1], got {self.attenuation}")
        if not (self.avg_snr > 0.0 and math.isfinite(self.avg_snr)):
            raise ValidationError(f"average SNR must be positive and finite, got {self.avg_snr}")

    @property
    def scale(self) -> float:
        """η·I^a, the attenuated scale every SNR expression uses."""
        return self.eta * self.attenuation

    def with_avg_snr(self, avg_snr: float) -> "EwChannel":
        return replace(self, avg_snr=avg_snr)


def ew_series_coefficients(alpha: float, count: int) -> NDArray[np.float64]:
    """C(α−1, j)(−1)^j for j < count, by the ratio recurrence."""
    j = np.arange(count - 1, dtype=np.float64)
    ratios = (j + 1.0 - alpha) / (j + 1.0)
    return np.concatenate(([1.0], np.cumprod(ratios)))


def ew_moment(alpha: float, beta: float, k: float = 1.0) -> float:
    """E[(I/η)^k] of a unit-scale EW variable.

    Sums α Γ(1+k/β) Σ_j C(α−1, j)(−1)^j (1+j)^{−(1+k/β)} and falls back to direct
    quadrature when the alternating tail has not settled.
    """
    exponent = 1.0 + k / beta
    coeffs = ew_series_coefficients(alpha, _MOMENT_SERIES_TERMS)
    terms = coeffs / np.power(np.arange(1.0, _MOMENT_SERIES_TERMS + 1.0), exponent)
    total = float(np.sum(terms))
    if abs(terms[-1]) <= _MOMENT_SERIES_RTOL * abs(total):
        return alpha * math.exp(log_gamma(exponent)) * total

    logger.warning(
        f"EW moment series for alpha={alpha:.4g}, beta={beta:.4g}, k={k:g} not settled after "
        f"{_MOMENT_SERIES_TERMS} terms; integrating directly"
    )

    def integrand(t: float) -> float:
        if t == 0.0:
            return 0.0
        return float(t ** (k / beta) * alpha * math.exp(-t) * (-math.expm1(-t)) ** (alpha - 1.0))

    value, abserr = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-10, limit=400)
    if abserr > 1e-8 * abs(value):
        raise ConvergenceError(
            f"EW moment k={k:g} failed both series and quadrature (error {abserr:.3e})"
        )
    return float(value)


def ew_fit(scintillation_index: float) -> Tuple[float, float, float]:
    """(α, β, η) from the aperture-averaged scintillation index, normalised to E[I] = 1."""
    if not (scintillation_index > 0.0 and math.isfinite(scintillation_index)):
        raise ValidationError(f"scintillation index must be positive, got {scintillation_index}")
    s2 = scintillation_index
    gamma_arg = 2.487 * s2 ** (1.0 / 6.0) - 0.104
    if gamma_arg <= 0.0:
        raise ValidationError(f"scintillation index {s2:.3g} is below the EW fitting range")
    alpha = 7.220 * s2 ** (1.0 / 3.0) / float(special.gamma(gamma_arg))
    beta = 1.012 * (alpha * s2) ** (-13.0 / 25.0) + 0.142
    eta = 1.0 / ew_moment(alpha, beta, 1.0)
    logger.debug(f"EW fit sigma2={s2:.6g} -> alpha={alpha:.6g}, beta={beta:.6g}, eta={eta:.6g}")
    return alpha, beta, eta


def ew_pdf(ch: EwChannel, irradiance: ArrayLike) -> Values:
    """Turbulence-only irradiance density of the unattenuated EW law."""
    values, scalar = _as_values(irradiance)
    x = values / ch.eta
    y = np.power(x, ch.beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        result = (
            (ch.alpha * ch.beta / ch.eta)
            * np.power(x, ch.beta - 1.0)
            * np.exp(-y)
            * np.power(-np.expm1(-y), ch.alpha - 1.0)
        )
    return _finish(np.nan_to_num(result, nan=0.0, posinf=np.inf), scalar)


def _ew_closed(y: NDArray[np.float64], alpha: float) -> NDArray[np.float64]:
    return np.power(-np.expm1(-y), alpha)


def ew_cdf_series(ch: EwChannel, gamma: float, settings: EvalSettings = DEFAULT_SETTINGS) -> SeriesSum:
    """Binomial expansion Σ_ρ C(α, ρ)(−1)^ρ exp(−ρ(√(γ/γ̄)/(ηI^a))^β) at one γ."""
    if gamma <= 0.0:
        return SeriesSum(0.0, 0, True)
    y = (math.sqrt(gamma / ch.avg_snr) / ch.scale) ** ch.beta
    summed = sum_series(
        lambda rho: binomial_real(ch.alpha, rho) * (-1.0) ** rho * math.exp(-rho * y),
        max_terms=settings.max_terms,
        rtol=settings.series_rtol,
    )
    if not summed.converged and abs(summed.last_term) > settings.truncation_tol:
        raise ConvergenceError(
            f"EW CDF series not converged after {summed.terms_used} terms "
            f"(last term {summed.last_term:.3e}) at gamma={gamma:.6g}"
        )
    return summed


def ew_cdf_snr(
    ch: EwChannel, gamma: ArrayLike, settings: EvalSettings = DEFAULT_SETTINGS
) -> Values:
    """SNR CDF of an EW hop; a hop with pointing error is routed to ``ew_pe_cdf_snr``."""
    if ch.pointing is not None:
        return ew_pe_cdf_snr(ch, gamma, settings)
    g, scalar = _as_values(gamma)
    if settings.ew_method == "series":
        flat = np.array([ew_cdf_series(ch, float(v), settings).value for v in g.ravel()])
        result = flat.reshape(g.shape)
    else:
        y = np.power(np.sqrt(g / ch.avg_snr) / ch.scale, ch.beta)
        result = _ew_closed(y, ch.alpha)
    return _finish(np.clip(result, 0.0, 1.0), scalar)


def ew_turbulence_sample(
    alpha: float, beta: float, eta: float, rng: np.random.Generator, size: Optional[int] = None
) -> Values:
    """Inverse-CDF draw η(−ln(1−U^{1/α}))^{1/β}."""
    u = rng.random(size)
    draws = eta * np.power(-np.log1p(-np.power(u, 1.0 / alpha)), 1.0 / beta)
    return draws if size is not None else float(draws)


def ew_sample(ch: EwChannel, rng: np.random.Generator, size: Optional[int] = None) -> Values:
    """Composite irradiance I^a·I^t·I^p."""
    draws = ch.attenuation * np.asarray(
        ew_turbulence_sample(ch.alpha, ch.beta, ch.eta, rng, size)
    )
    if ch.pointing is not None:
        draws = draws * np.asarray(pe_sample(ch.pointing, rng, size))
    return draws if size is not None else float(draws)


def ew_snr_sample(ch: EwChannel, rng: np.random.Generator, size: Optional[int] = None) -> Values:
    irradiance = np.asarray(ew_sample(ch, rng, size))
    snr = ch.avg_snr * np.square(irradiance)
    return snr if size is not None else float(snr)


def _pointing_quadrature(
    ch: EwChannel, x: float, gain: PointingGain, settings: EvalSettings
) -> float:
    def f_ew(y: float) -> float:
        return float((-math.expm1(-((y / ch.eta) ** ch.beta))) ** ch.alpha)

    floor = f_ew(x)
    if floor >= 1.0:
        return 1.0
    g2 = gain.g2

    def integrand(tau: float) -> float:
        return f_ew(x * math.exp(tau / g2)) * math.exp(-tau)

    epsabs = min(settings.quad_epsabs, settings.quad_epsrel * floor) if floor > 0.0 else 0.0
    value, abserr = integrate.quad(
        integrand, 0.0, np.inf, epsabs=epsabs, epsrel=settings.quad_epsrel, limit=400
    )
    if abserr > max(1e-6 * abs(value), settings.quad_epsabs):
        raise QuadratureError(
            f"EW x pointing CDF quadrature at x={x:.6g} reached error {abserr:.3e} "
            f"for value {value:.6e}"
        )
    return float(value)


def _pointing_meijer(
    ch: EwChannel, x: float, gain: PointingGain, settings: EvalSettings
) -> SeriesSum:
    t1 = gain.g2 / ch.beta
    xi = (x / ch.eta) ** ch.beta
    base = math.log(ch.alpha * t1) + t1 * math.log(xi)
    coeffs = ew_series_coefficients(ch.alpha, settings.max_terms)

    def term(i: int) -> float:
        c = float(coeffs[i])
        if c == 0.0:
            return 0.0
        z = (1.0 + i) * xi
        g_scaled = meijer_g_scaled(MeijerGSpec.pointing_cdf(t1, z), rtol=settings.meijer_rtol)
        log_terms = base + (t1 - 1.0) * math.log1p(i) + math.log(abs(c))
        return math.copysign(1.0, c) * scaled_product(log_terms, g_scaled)

    summed = sum_series(term, max_terms=settings.max_terms, rtol=settings.series_rtol)
    if not summed.converged and abs(summed.last_term) > settings.truncation_tol:
        raise ConvergenceError(
            f"EW x pointing Meijer-G series not converged after {summed.terms_used} terms "
            f"(last term {summed.last_term:.3e})"
        )
    return summed


def ew_pe_cdf_snr(
    ch: EwChannel, gamma: ArrayLike, settings: EvalSettings = DEFAULT_SETTINGS
) -> Values:
    """SNR CDF of the EW x zero-boresight pointing product channel.

    ``settings.pointing_method`` selects the Meijer-G series over i or the exact
    one-dimensional average of the EW CDF over the pointing law.
    """
    if ch.pointing is None:
        raise ValidationError("ew_pe_cdf_snr needs a channel with pointing error")
    if ch.pointing.boresight > 0.0:
        raise UnsupportedError(
            f"EW x pointing CDF needs zero boresight, got {ch.pointing.boresight:g} m"
        )
    g, scalar = _as_values(gamma)
    gain = pe_params(ch.pointing)
    flat = np.zeros(g.size)
    for index, value in enumerate(g.ravel()):
        if value == 0.0:
            continue
        x = math.sqrt(value / ch.avg_snr) / (ch.attenuation * gain.a0)
        if math.isinf(gain.g):
            flat[index] = float(_ew_closed(np.asarray((x / ch.eta) ** ch.beta), ch.alpha))
        elif settings.pointing_method == "meijer":
            flat[index] = _pointing_meijer(ch, x, gain, settings).value
        else:
            flat[index] = _pointing_quadrature(ch, x, gain, settings)
    return _finish(np.clip(flat.reshape(g.shape), 0.0, 1.0), scalar)


def ew_snr_mean(ch: EwChannel, settings: EvalSettings = DEFAULT_SETTINGS) -> float:
    """E[γ] = γ̄(ηI^a)² Γ(1+2/β) Σ_{ρ≥1} C(α, ρ)(−1)^{ρ+1} ρ^{−2/β}, times the pointing moment.

    With ``ew_method = "series"`` the sum over ρ is truncated at ``settings.max_terms``;
    otherwise the equivalent second moment from :func:`ew_moment` is used.
    """
    if settings.ew_method == "series":
        summed = sum_series(
            lambda rho: binomial_real(ch.alpha, rho) * (-1.0) ** (rho + 1) * rho ** (-2.0 / ch.beta),
            max_terms=settings.max_terms,
            rtol=settings.series_rtol,
            start=1,
        )
        if not summed.converged and abs(summed.last_term) > settings.truncation_tol:
            raise ConvergenceError(
                f"EW mean series not converged after {summed.terms_used} terms "
                f"(last term {summed.last_term:.3e})"
            )
        second = math.exp(log_gamma(1.0 + 2.0 / ch.beta)) * summed.value
    else:
        second = ew_moment(ch.alpha, ch.beta, 2.0)
    mean = ch.avg_snr * ch.scale**2 * second
    if ch.pointing is not None:
        mean *= pe_moment(ch.pointing, 2.0)
    return mean
