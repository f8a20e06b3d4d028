"""Deterministic atmospheric physics for the optical and RF hops.

Altitudes, lengths and wavelengths are in metres; angles enter as degrees on the
path descriptors and are converted here. Profile integrals use adaptive
quadrature with break points placed where the Hufnagel-Valley terms change scale.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from hapslink.link import QuadratureError, ValidationError

logger = logging.getLogger(__name__)

RYTOV_HORIZONTAL_EXPONENT = 11.0 / 6.0
BEAM_WANDER_CR = math.pi

# Offsets (m) above the lower terminal where the profile changes scale.
_PROFILE_BREAKS = (100.0, 500.0, 1_500.0, 5_000.0, 10_000.0, 20_000.0, 40_000.0, 80_000.0)
_QUAD_EPSREL = 1e-7
_QUAD_ACCEPT = 1e-3


@dataclass(frozen=True)
class TurbulencePath:
    """Geometry and atmosphere of one optical hop.

    A horizontal path sets ``link_length``; a slant path leaves it ``None`` and is
    described by the two terminal altitudes and the zenith angle.
    """

    h_low: float = 0.0
    h_high: float = 0.0
    zenith_deg: float = 0.0
    wind_speed: float = 21.0
    cn2_nominal: float = 1e-18
    wavelength: float = 1550e-9
    beam_radius_tx: float = 0.02
    phase_front_radius: float = math.inf
    link_length: Optional[float] = None
    beam_wander_cr: float = BEAM_WANDER_CR

    def __post_init__(self) -> None:
        if self.link_length is None:
            if not (self.h_high > self.h_low >= 0.0):
                raise ValidationError(
                    f"slant path needs h_high > h_low >= 0, got h_low={self.h_low}, "
                    f"h_high={self.h_high}"
                )
        elif not self.link_length > 0.0:
            raise ValidationError(f"horizontal path needs link_length > 0, got {self.link_length}")
        if not (0.0 <= self.zenith_deg < 90.0):
            raise ValidationError(f"zenith angle must lie in [0, 90) degrees, got {self.zenith_deg}")
        if self.wavelength <= 0.0 or self.beam_radius_tx <= 0.0:
            raise ValidationError("wavelength and beam radius must be positive")
        if self.cn2_nominal < 0.0 or self.wind_speed < 0.0:
            raise ValidationError("cn2_nominal and wind_speed must be non-negative")
        if self.phase_front_radius == 0.0:
            raise ValidationError("phase_front_radius must be non-zero (use inf for collimated)")

    @property
    def is_horizontal(self) -> bool:
        return self.link_length is not None

    @property
    def sec_zenith(self) -> float:
        return 1.0 / math.cos(math.radians(self.zenith_deg))

    @property
    def vertical_extent(self) -> float:
        return self.h_high - self.h_low


@dataclass(frozen=True)
class PathLossBudget:
    """RF link budget terms; F[dB] = G_T + G_R - L_F - L_R - L_A."""

    gain_tx_dBi: float = 0.0
    gain_rx_dBi: float = 0.0
    freq_GHz: float = 2.0
    distance_km: float = 18.0
    rain_loss_dB: float = 0.0
    gas_loss_dB: float = 0.0

    def __post_init__(self) -> None:
        if self.freq_GHz <= 0.0 or self.distance_km <= 0.0:
            raise ValidationError(
                f"link budget needs positive frequency and distance, got "
                f"{self.freq_GHz} GHz, {self.distance_km} km"
            )


@dataclass(frozen=True)
class BeamParameters:
    theta0: float
    lambda0: float
    width: float
    theta: float


def u_rms(wind_speed: float) -> float:
    """RMS wind speed of the Hufnagel-Valley profile from the slew/ground wind."""
    return math.sqrt(wind_speed**2 + 30.69 * wind_speed + 348.91)


def wave_number(wavelength: float) -> float:
    return 2.0 * math.pi / wavelength


def _require_slant(path: TurbulencePath) -> None:
    if path.is_horizontal:
        raise ValidationError("operation needs a slant path (link_length must be None)")


def cn2_profile(h: ArrayLike, path: TurbulencePath) -> NDArray[np.float64]:
    """Refractive-index structure parameter Cn²(h) in m^-2/3."""
    h = np.asarray(h, dtype=np.float64)
    if np.any(h < 0.0):
        raise ValidationError("altitude must be non-negative")
    u = u_rms(path.wind_speed)
    return (
        0.00594 * (u / 27.0) ** 2 * (1e-5 * h) ** 10 * np.exp(-h / 1000.0)
        + 2.7e-16 * np.exp(-h / 1500.0)
        + path.cn2_nominal * np.exp(-h / 100.0)
    )


def _altitude_quad(
    integrand: Callable[[float], float], h_low: float, h_high: float, what: str
) -> float:
    points: Sequence[float] = [
        h_low + offset for offset in _PROFILE_BREAKS if h_low + offset < h_high
    ]
    value, abserr = integrate.quad(
        integrand, h_low, h_high, points=points or None, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400
    )
    if not math.isfinite(value) or abserr > _QUAD_ACCEPT * abs(value):
        raise QuadratureError(
            f"{what} integral over [{h_low:.0f}, {h_high:.0f}] m did not converge "
            f"(value {value:.4e}, error {abserr:.2e})"
        )
    return float(value)


def cn2_integral(path: TurbulencePath) -> float:
    """∫ Cn²(h) dh between the two terminal altitudes."""
    _require_slant(path)
    return _altitude_quad(
        lambda h: float(cn2_profile(h, path)), path.h_low, path.h_high, "Cn2"
    )


def slant_length(path: TurbulencePath) -> float:
    if path.is_horizontal:
        assert path.link_length is not None
        return path.link_length
    return path.vertical_extent * path.sec_zenith


def fried_parameter(path: TurbulencePath) -> float:
    """Atmospheric coherence length r0 of the slant path (m)."""
    _require_slant(path)
    k = wave_number(path.wavelength)
    integral = cn2_integral(path)
    return float((0.42 * path.sec_zenith * k**2 * integral) ** (-3.0 / 5.0))


def beam_parameters(path: TurbulencePath) -> BeamParameters:
    length = slant_length(path)
    k = wave_number(path.wavelength)
    theta0 = 1.0 - length / path.phase_front_radius
    lambda0 = 2.0 * length / (k * path.beam_radius_tx**2)
    norm = theta0**2 + lambda0**2
    return BeamParameters(
        theta0=theta0,
        lambda0=lambda0,
        width=path.beam_radius_tx * math.sqrt(norm),
        theta=theta0 / norm,
    )


def beam_wander_variance(path: TurbulencePath, r0: Optional[float] = None) -> float:
    """Beam-wander induced pointing-error variance σ_pe² (m²) of an uplink."""
    _require_slant(path)
    if r0 is None:
        r0 = fried_parameter(path)
    w0 = path.beam_radius_tx
    ratio = (path.beam_wander_cr * w0 / r0) ** 2
    bracket = 1.0 - (ratio / (1.0 + ratio)) ** (1.0 / 6.0)
    return (
        0.54
        * path.vertical_extent
        * path.sec_zenith**2
        * (path.wavelength / (2.0 * w0)) ** 2
        * (2.0 * w0 / r0) ** (5.0 / 3.0)
        * bracket
    )


def mu3u(path: TurbulencePath) -> float:
    """Re ∫ Cn²(h)[iε(1-ε)]^{5/6} dh with ε = 1 - (h - h_low)/(h_high - h_low)."""
    _require_slant(path)
    extent = path.vertical_extent

    def weighted(h: float) -> float:
        eps = 1.0 - (h - path.h_low) / extent
        return float(cn2_profile(h, path)) * max(eps * (1.0 - eps), 0.0) ** (5.0 / 6.0)

    return math.cos(5.0 * math.pi / 12.0) * _altitude_quad(
        weighted, path.h_low, path.h_high, "mu3u"
    )


def rytov_uplink(path: TurbulencePath) -> float:
    """σ_Bu² = 8.7 μ3u K^{7/6} (H_S - H_1)^{5/6} sec^{11/6}(ξ)."""
    k = wave_number(path.wavelength)
    return (
        8.7
        * mu3u(path)
        * k ** (7.0 / 6.0)
        * path.vertical_extent ** (5.0 / 6.0)
        * path.sec_zenith ** (11.0 / 6.0)
    )


def scintillation_uplink(path: TurbulencePath) -> float:
    """Scintillation index of an uplink beam including beam-wander pointing jitter."""
    _require_slant(path)
    r0 = fried_parameter(path)
    beam = beam_parameters(path)
    alpha_pe = math.sqrt(beam_wander_variance(path, r0)) / slant_length(path)
    pointing = (
        5.95
        * path.vertical_extent**2
        * path.sec_zenith**2
        * (2.0 * path.beam_radius_tx / r0) ** (5.0 / 3.0)
        * (alpha_pe / beam.width) ** 2
    )
    sigma2 = rytov_uplink(path)
    logger.debug(
        f"uplink scintillation: r0={r0:.4g} m, sigma_Bu^2={sigma2:.4g}, "
        f"pointing term={pointing:.3e}"
    )
    return uplink_index(sigma2, pointing, beam.theta)


def uplink_index(sigma_bu2: float, pointing_term: float, theta: float) -> float:
    """Combine the beam-wander term and the Rytov variance into the uplink index."""
    s125 = sigma_bu2 ** (6.0 / 5.0)
    rytov = math.exp(
        0.49 * sigma_bu2 / (1.0 + (1.11 + theta) * s125) ** (7.0 / 6.0)
        + 0.51 * sigma_bu2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0)
    )
    return pointing_term + rytov - 1.0


def rytov_downlink(path: TurbulencePath) -> float:
    """σ_Bd² = 2.25 K^{7/6} sec^{11/6}(ξ) ∫ Cn²(h)(h - h_low)^{5/6} dh."""
    _require_slant(path)
    k = wave_number(path.wavelength)
    integral = _altitude_quad(
        lambda h: float(cn2_profile(h, path)) * (h - path.h_low) ** (5.0 / 6.0),
        path.h_low,
        path.h_high,
        "downlink Rytov",
    )
    return 2.25 * k ** (7.0 / 6.0) * path.sec_zenith ** (11.0 / 6.0) * integral


def scintillation_downlink(path: TurbulencePath, aperture_diameter: float) -> float:
    """Aperture-averaged scintillation index of a downlink; D = 0 is a point receiver."""
    if aperture_diameter < 0.0:
        raise ValidationError(f"aperture diameter must be non-negative, got {aperture_diameter}")
    k = wave_number(path.wavelength)
    d2 = k * aperture_diameter**2 / (4.0 * slant_length(path))
    return downlink_index(rytov_downlink(path), d2)


def downlink_index(sigma_bd2: float, d2: float) -> float:
    """Aperture-averaged index from the downlink Rytov variance and d² = KD²/4L."""
    sigma2 = sigma_bd2
    s125 = sigma2 ** (6.0 / 5.0)
    exponent = 0.49 * sigma2 / (1.0 + 0.18 * d2 + 0.56 * s125) ** (7.0 / 6.0) + 0.51 * sigma2 * (
        1.0 + 0.69 * s125
    ) ** (-5.0 / 6.0) / (1.0 + 0.90 * d2 + 0.62 * d2 * s125)
    return math.exp(exponent) - 1.0


def scintillation_horizontal(
    path: TurbulencePath, exponent: float = RYTOV_HORIZONTAL_EXPONENT
) -> float:
    """σ²_I = 1.23 Cn² K^{7/6} L^{exponent} for a constant-Cn² horizontal path."""
    if not path.is_horizontal:
        raise ValidationError("horizontal scintillation needs link_length")
    assert path.link_length is not None
    k = wave_number(path.wavelength)
    return 1.23 * path.cn2_nominal * k ** (7.0 / 6.0) * path.link_length**exponent


def stratospheric_attenuation(phi: float, distance: float) -> float:
    """Beer-Lambert irradiance factor exp(-φ L)."""
    if phi < 0.0 or distance < 0.0:
        raise ValidationError("attenuation coefficient and distance must be non-negative")
    return math.exp(-phi * distance)


def free_space_loss_dB(freq_GHz: float, distance_km: float) -> float:
    return 92.45 + 20.0 * math.log10(freq_GHz) + 20.0 * math.log10(distance_km)


def path_loss_dB(budget: PathLossBudget) -> float:
    """Net link gain F in dB (negative for a lossy link)."""
    return (
        budget.gain_tx_dBi
        + budget.gain_rx_dBi
        - free_space_loss_dB(budget.freq_GHz, budget.distance_km)
        - budget.rain_loss_dB
        - budget.gas_loss_dB
    )


def haps_separation(h_haps: float, h_sat: float, zenith_deg: float) -> float:
    """Ground-projected distance between the two HAPS of the satellite-relayed chain."""
    if not h_sat > h_haps:
        raise ValidationError("satellite must fly above the HAPS")
    return 2.0 * (h_sat - h_haps) * math.tan(math.radians(zenith_deg))
