"""Scenario configuration files.

INI text is read with ``configparser`` and validated section by section with pydantic
models. Errors are reported against the line of the offending key or section header.
"""

import configparser
import logging
import re
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hapslink.link import ConfigError, HapsLinkError
from hapslink.link.atmosphere import (
    PathLossBudget,
    TurbulencePath,
    path_loss_dB,
    scintillation_downlink,
    scintillation_horizontal,
    scintillation_uplink,
    slant_length,
    stratospheric_attenuation,
)
from hapslink.link.channels import (
    EwChannel,
    PointingError,
    ShadowedRicianChannel,
    beam_width_at,
    ew_fit,
)
from hapslink.link.metrics import ModulationScheme
from hapslink.link.scenario import NodePowers, Scenario, ScenarioKind
from hapslink.link.settings import EvalSettings
from hapslink.link.units import db_to_linear, dbm_to_watts

logger = logging.getLogger(__name__)

SweepVariable = Literal[
    "avg_snr_per_hop_dB", "P_G_dBm", "aperture_diameter", "haps_distance_km", "n_users"
]
METRIC_NAMES = ("op", "op_asymptotic", "ber", "capacity", "capacity_ub", "ee")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(_Section):
    kind: Literal["s1", "s2"]
    time_slots: Optional[int] = None
    gamma_out_dB: float = 7.0
    n_users: int = Field(default=1, ge=1)
    modulation: str = "CBPSK"
    avg_snr_dB: Optional[float] = None
    horizontal_exponent: float = Field(default=11.0 / 6.0, gt=0.0)
    ew_method: Literal["closed", "series"] = "closed"
    pointing_method: Literal["quadrature", "meijer"] = "quadrature"

    @field_validator("modulation")
    @classmethod
    def _known_modulation(cls, value: str) -> str:
        try:
            ModulationScheme.from_name(value)
        except HapsLinkError as e:
            raise ValueError(str(e)) from e
        return value.upper()

    @model_validator(mode="after")
    def _slots_match_kind(self) -> "ScenarioSection":
        expected = 3 if self.kind == "s1" else 4
        if self.time_slots is not None and self.time_slots != expected:
            raise ValueError(
                f"time_slots={self.time_slots} does not match kind={self.kind} "
                f"(expected {expected})"
            )
        return self


class PowersSection(_Section):
    P_G: float
    P_H1: float
    P_H2: float
    P_S: Optional[float] = None


class RfSection(_Section):
    shadowing: Optional[Literal["heavy", "average", "light"]] = None
    m: Optional[int] = Field(default=None, ge=1)
    b: Optional[float] = Field(default=None, gt=0.0)
    omega: Optional[float] = Field(default=None, ge=0.0)
    avg_snr_dB: Optional[float] = None
    gain_tx_dBi: Optional[float] = None
    gain_rx_dBi: Optional[float] = None
    freq_GHz: Optional[float] = Field(default=None, gt=0.0)
    distance_km: Optional[float] = Field(default=None, gt=0.0)
    rain_loss_dB: float = Field(default=0.0, ge=0.0)
    gas_loss_dB: float = Field(default=0.0, ge=0.0)
    noise_dBm: Optional[float] = None

    @model_validator(mode="after")
    def _one_fading_description(self) -> "RfSection":
        explicit = [self.m, self.b, self.omega]
        if self.shadowing is None and any(v is None for v in explicit):
            raise ValueError("give either shadowing = heavy|average|light or all of m, b, omega")
        if self.shadowing is not None and any(v is not None for v in explicit):
            raise ValueError("shadowing preset and explicit m/b/omega are mutually exclusive")
        budget = [self.gain_tx_dBi, self.gain_rx_dBi, self.freq_GHz, self.distance_km, self.noise_dBm]
        if any(v is not None for v in budget) and any(v is None for v in budget):
            raise ValueError(
                "a link budget needs gain_tx_dBi, gain_rx_dBi, freq_GHz, distance_km and noise_dBm"
            )
        return self

    @property
    def has_budget(self) -> bool:
        return self.noise_dBm is not None


class _EwOverride(_Section):
    alpha: Optional[float] = Field(default=None, gt=0.0)
    beta: Optional[float] = Field(default=None, gt=0.0)
    eta: Optional[float] = Field(default=None, gt=0.0)
    avg_snr_dB: Optional[float] = None
    phi: float = Field(default=0.0, ge=0.0)
    wavelength_nm: float = Field(default=1550.0, gt=0.0)

    @model_validator(mode="after")
    def _all_or_none(self) -> "_EwOverride":
        given = [v is not None for v in (self.alpha, self.beta, self.eta)]
        if any(given) and not all(given):
            raise ValueError("explicit EW parameters need all of alpha, beta, eta")
        return self

    @property
    def explicit_ew(self) -> bool:
        return self.alpha is not None


class HorizontalFsoSection(_EwOverride):
    distance_km: float = Field(default=100.0, gt=0.0)
    cn2: float = Field(default=1e-18, ge=0.0)


class SlantFsoSection(_EwOverride):
    h_haps_km: float = Field(default=18.0, ge=0.0)
    h_sat_km: float = Field(default=500.0, gt=0.0)
    zenith_deg: float = Field(default=70.0, ge=0.0, lt=90.0)
    wind_speed: float = Field(default=21.0, ge=0.0)
    cn2_nominal: float = Field(default=1e-18, ge=0.0)
    beam_radius_cm: float = Field(default=2.0, gt=0.0)
    aperture_diameter_cm: float = Field(default=0.0, ge=0.0)
    divergence_urad: Optional[float] = Field(default=None, gt=0.0)
    jitter_cm: Optional[float] = Field(default=None, gt=0.0)
    stratopause_km: float = Field(default=50.0, gt=0.0)

    @model_validator(mode="after")
    def _geometry(self) -> "SlantFsoSection":
        if not self.h_sat_km > self.h_haps_km:
            raise ValueError("h_sat_km must exceed h_haps_km")
        if (self.divergence_urad is None) != (self.jitter_cm is None):
            raise ValueError("pointing error needs both divergence_urad and jitter_cm")
        if self.divergence_urad is not None and self.aperture_diameter_cm <= 0.0:
            raise ValueError("pointing error needs a positive aperture_diameter_cm")
        return self

    @property
    def has_pointing(self) -> bool:
        return self.divergence_urad is not None


class SweepSection(_Section):
    variable: SweepVariable
    start: float
    stop: float
    step: float = Field(gt=0.0)
    metrics: tuple[str, ...]
    mc: bool = True
    samples: int = Field(default=1_000_000, ge=1_000)
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    ci_level: float = Field(default=0.95, gt=0.0, lt=1.0)

    @field_validator("metrics", mode="before")
    @classmethod
    def _split_metrics(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(part.strip() for part in value.split(",") if part.strip())
        return value

    @field_validator("metrics")
    @classmethod
    def _known_metrics(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        if not value:
            raise ValueError("at least one metric is required")
        unknown = [name for name in value if name not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; expected a subset of {list(METRIC_NAMES)}")
        return value

    @model_validator(mode="after")
    def _range(self) -> "SweepSection":
        if not self.start < self.stop:
            raise ValueError(f"sweep start {self.start} must be below stop {self.stop}")
        return self


class HapsConfig(_Section):
    scenario: ScenarioSection
    powers: PowersSection
    uplink: RfSection
    downlink: RfSection
    fso: Optional[HorizontalFsoSection] = None
    fso_up: Optional[SlantFsoSection] = None
    fso_down: Optional[SlantFsoSection] = None
    sweep: SweepSection

    @model_validator(mode="after")
    def _hops_match_kind(self) -> "HapsConfig":
        if self.scenario.kind == "s1":
            if self.fso is None:
                raise ValueError("kind = s1 needs an [fso] section")
            if self.fso_up is not None or self.fso_down is not None:
                raise ValueError("kind = s1 takes [fso], not [fso_up]/[fso_down]")
        else:
            if self.fso_up is None or self.fso_down is None:
                raise ValueError("kind = s2 needs [fso_up] and [fso_down] sections")
            if self.fso is not None:
                raise ValueError("kind = s2 takes [fso_up]/[fso_down], not [fso]")
            if self.powers.P_S is None:
                raise ValueError("kind = s2 needs P_S in [powers]")
        return self


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s;#\[][^=:]*?)\s*[=:]")


def _line_map(text: str) -> dict[tuple[str, ...], int]:
    lines: dict[tuple[str, ...], int] = {}
    section: Optional[str] = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section,), number)
            continue
        key = _KEY_RE.match(line)
        if key and section is not None:
            lines.setdefault((section, key.group(1).strip()), number)
    return lines


def _locate(loc: tuple[Any, ...], lines: Mapping[tuple[str, ...], int]) -> tuple[Optional[int], Optional[str]]:
    parts = tuple(str(p) for p in loc)
    if not parts:
        return None, None
    section = parts[0]
    if len(parts) > 1 and (section, parts[1]) in lines:
        return lines[(section, parts[1])], section
    return lines.get((section,)), section


def parse_config(text: str, path: Optional[str] = None) -> HapsConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#"), empty_lines_in_values=False
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any section", line=e.lineno, path=path) from e
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", line=e.lineno, path=path) from e
    except configparser.DuplicateOptionError as e:
        raise ConfigError(
            f"duplicate key {e.option!r}", line=e.lineno, section=e.section, path=path
        ) from e
    except configparser.Error as e:
        raise ConfigError(str(e).splitlines()[0], path=path) from e

    lines = _line_map(text)
    raw = {name: dict(parser.items(name)) for name in parser.sections()}
    try:
        config = HapsConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        line, section = _locate(tuple(first["loc"]), lines)
        key = ".".join(str(p) for p in first["loc"][1:])
        message = first["msg"].removeprefix("Value error, ")
        if first["type"] == "extra_forbidden":
            message = f"unknown key {key!r}" if key else f"unknown section [{section}]"
        elif first["type"] == "missing":
            message = f"missing required key {key!r}" if key else f"missing section [{section}]"
        elif key:
            message = f"{key}: {message}"
        raise ConfigError(message, line=line, section=section, path=path) from e
    logger.debug(f"parsed {path or '<config>'}: kind={config.scenario.kind}")
    return config


def load_config(path: Union[str, Path]) -> HapsConfig:
    location = Path(path)
    try:
        text = location.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path=str(location)) from e
    return parse_config(text, str(location))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    return str(value)


def serialize_config(cfg: HapsConfig) -> str:
    """INI text that parses back to an equal config."""
    blocks = []
    for name in HapsConfig.model_fields:
        section = getattr(cfg, name)
        if section is None:
            continue
        body = [f"[{name}]"]
        for key, value in section.model_dump(exclude_none=True).items():
            body.append(f"{key} = {_format_value(value)}")
        blocks.append("\n".join(body))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Scenario construction
# ---------------------------------------------------------------------------


def _rf_snr_dB(section: RfSection, power_dBm: float, fallback: Optional[float], name: str) -> float:
    if section.avg_snr_dB is not None:
        return section.avg_snr_dB
    if section.has_budget:
        assert section.gain_tx_dBi is not None and section.gain_rx_dBi is not None
        assert section.freq_GHz is not None and section.distance_km is not None
        assert section.noise_dBm is not None
        budget = PathLossBudget(
            gain_tx_dBi=section.gain_tx_dBi,
            gain_rx_dBi=section.gain_rx_dBi,
            freq_GHz=section.freq_GHz,
            distance_km=section.distance_km,
            rain_loss_dB=section.rain_loss_dB,
            gas_loss_dB=section.gas_loss_dB,
        )
        return power_dBm + path_loss_dB(budget) - section.noise_dBm
    if fallback is not None:
        return fallback
    raise ConfigError("no average SNR: set avg_snr_dB here or in [scenario], or a link budget", section=name)


def _fso_snr_dB(section: _EwOverride, fallback: Optional[float], name: str) -> float:
    if section.avg_snr_dB is not None:
        return section.avg_snr_dB
    if fallback is not None:
        return fallback
    raise ConfigError("no average SNR: set avg_snr_dB here or in [scenario]", section=name)


def _rf_channel(section: RfSection, snr_dB: float) -> ShadowedRicianChannel:
    avg_snr = db_to_linear(snr_dB)
    if section.shadowing is not None:
        return ShadowedRicianChannel.from_preset(section.shadowing, avg_snr)
    assert section.m is not None and section.b is not None and section.omega is not None
    return ShadowedRicianChannel(section.m, section.b, section.omega, avg_snr)


def _horizontal_hop(section: HorizontalFsoSection, snr_dB: float, settings: EvalSettings) -> EwChannel:
    distance_m = section.distance_km * 1e3
    attenuation = stratospheric_attenuation(section.phi, distance_m)
    if section.explicit_ew:
        assert section.alpha is not None and section.beta is not None and section.eta is not None
        alpha, beta, eta = section.alpha, section.beta, section.eta
    else:
        path = TurbulencePath(
            link_length=distance_m,
            cn2_nominal=section.cn2,
            wavelength=section.wavelength_nm * 1e-9,
        )
        alpha, beta, eta = ew_fit(scintillation_horizontal(path, settings.horizontal_exponent))
    return EwChannel(alpha, beta, eta, attenuation, db_to_linear(snr_dB))


def _slant_hop(section: SlantFsoSection, snr_dB: float, downlink: bool) -> EwChannel:
    path = TurbulencePath(
        h_low=section.h_haps_km * 1e3,
        h_high=section.h_sat_km * 1e3,
        zenith_deg=section.zenith_deg,
        wind_speed=section.wind_speed,
        cn2_nominal=section.cn2_nominal,
        wavelength=section.wavelength_nm * 1e-9,
        beam_radius_tx=section.beam_radius_cm * 1e-2,
    )
    aperture = section.aperture_diameter_cm * 1e-2
    if section.explicit_ew:
        assert section.alpha is not None and section.beta is not None and section.eta is not None
        alpha, beta, eta = section.alpha, section.beta, section.eta
    else:
        index = scintillation_downlink(path, aperture) if downlink else scintillation_uplink(path)
        alpha, beta, eta = ew_fit(index)
    absorbing = max(section.stratopause_km - section.h_haps_km, 0.0) * 1e3 * path.sec_zenith
    attenuation = stratospheric_attenuation(section.phi, absorbing)
    pointing = None
    if section.has_pointing:
        assert section.divergence_urad is not None and section.jitter_cm is not None
        pointing = PointingError(
            aperture_radius=aperture / 2.0,
            beam_width_rx=beam_width_at(section.divergence_urad * 1e-6, slant_length(path)),
            jitter_sigma=section.jitter_cm * 1e-2,
        )
    return EwChannel(alpha, beta, eta, attenuation, db_to_linear(snr_dB), pointing)


def _apply_override(cfg: HapsConfig, variable: str, value: float) -> tuple[HapsConfig, dict[str, float]]:
    """Config with the sweep variable set, plus per-hop SNR shifts in dB."""
    shifts: dict[str, float] = {}
    if variable == "avg_snr_per_hop_dB":
        return cfg, {"*": value}
    if variable == "n_users":
        if value < 1 or not float(value).is_integer():
            raise ConfigError(f"n_users sweep value must be a positive integer, got {value}", section="sweep")
        return cfg.model_copy(update={"scenario": cfg.scenario.model_copy(update={"n_users": int(value)})}), shifts
    if variable == "P_G_dBm":
        shifts["uplink"] = value - cfg.powers.P_G
        return cfg.model_copy(update={"powers": cfg.powers.model_copy(update={"P_G": value})}), shifts
    if variable == "haps_distance_km":
        if cfg.fso is None:
            raise ConfigError("haps_distance_km sweeps need kind = s1", section="sweep")
        return cfg.model_copy(update={"fso": cfg.fso.model_copy(update={"distance_km": value})}), shifts
    if variable == "aperture_diameter":
        if cfg.fso_down is None:
            raise ConfigError("aperture_diameter sweeps need kind = s2", section="sweep")
        down = cfg.fso_down.model_copy(update={"aperture_diameter_cm": value})
        return cfg.model_copy(update={"fso_down": down}), shifts
    raise ConfigError(f"unknown sweep variable {variable!r}", section="sweep")


def build_scenario(
    cfg: HapsConfig, variable: Optional[str] = None, value: Optional[float] = None
) -> Scenario:
    """Scenario of the config, optionally with one sweep variable set to ``value``."""
    shifts: dict[str, float] = {}
    base_P_G = cfg.powers.P_G
    if variable is not None and value is not None:
        cfg, shifts = _apply_override(cfg, variable, value)
    sc = cfg.scenario
    fixed = shifts.get("*")
    settings = EvalSettings(
        ew_method=sc.ew_method,
        pointing_method=sc.pointing_method,
        horizontal_exponent=sc.horizontal_exponent,
    )
    powers = cfg.powers
    section = "uplink"
    try:
        up_dB = fixed if fixed is not None else _rf_snr_dB(cfg.uplink, base_P_G, sc.avg_snr_dB, "uplink")
        up_dB += shifts.get("uplink", 0.0) if fixed is None else 0.0
        uplink = _rf_channel(cfg.uplink, up_dB)
        section = "downlink"
        down_dB = fixed if fixed is not None else _rf_snr_dB(cfg.downlink, powers.P_H2, sc.avg_snr_dB, "downlink")
        user = _rf_channel(cfg.downlink, down_dB)
        hops: list[EwChannel] = []
        if sc.kind == "s1":
            assert cfg.fso is not None
            section = "fso"
            snr = fixed if fixed is not None else _fso_snr_dB(cfg.fso, sc.avg_snr_dB, "fso")
            hops.append(_horizontal_hop(cfg.fso, snr, settings))
        else:
            assert cfg.fso_up is not None and cfg.fso_down is not None
            for section, part, downlink in (("fso_up", cfg.fso_up, False), ("fso_down", cfg.fso_down, True)):
                snr = fixed if fixed is not None else _fso_snr_dB(part, sc.avg_snr_dB, section)
                hops.append(_slant_hop(part, snr, downlink))
        section = "powers"
        node_powers = NodePowers(
            dbm_to_watts(powers.P_G),
            dbm_to_watts(powers.P_H1),
            dbm_to_watts(powers.P_H2),
            None if powers.P_S is None else dbm_to_watts(powers.P_S),
        )
        return Scenario(
            kind=ScenarioKind(sc.kind),
            uplink_rf=uplink,
            fso_hops=tuple(hops),
            downlink_rf_users=(user,) * sc.n_users,
            time_slots=sc.time_slots,
            powers=node_powers,
            settings=settings,
        )
    except ConfigError:
        raise
    except HapsLinkError as e:
        raise ConfigError(f"{type(e).__name__}: {e}", section=section) from e


def modulation_of(cfg: HapsConfig) -> ModulationScheme:
    return ModulationScheme.from_name(cfg.scenario.modulation)
