"""Pytest configuration for the project."""

import math

import dotenv
import numpy as np
import pytest

from hapslink.link.channels import EwChannel, ShadowedRicianChannel, ew_fit
from hapslink.link.config import HapsConfig, parse_config
from hapslink.link.scenario import NodePowers, Scenario, ScenarioKind

dotenv.load_dotenv()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def heavy_rf() -> ShadowedRicianChannel:
    return ShadowedRicianChannel.from_preset("heavy", 100.0)


@pytest.fixture
def average_rf() -> ShadowedRicianChannel:
    return ShadowedRicianChannel.from_preset("average", 100.0)


@pytest.fixture
def ew_hop() -> EwChannel:
    """Moderate-turbulence optical hop with unit mean irradiance."""
    alpha, beta, eta = ew_fit(0.2)
    return EwChannel(alpha, beta, eta, attenuation=math.exp(-0.1), avg_snr=100.0)


@pytest.fixture
def s1_scenario(heavy_rf: ShadowedRicianChannel, ew_hop: EwChannel) -> Scenario:
    return Scenario(
        kind=ScenarioKind.S1,
        uplink_rf=heavy_rf,
        fso_hops=(ew_hop,),
        downlink_rf_users=(heavy_rf,) * 3,
        powers=NodePowers(1.0, 1.0, 1.0),
    )


@pytest.fixture
def s2_scenario(heavy_rf: ShadowedRicianChannel, ew_hop: EwChannel) -> Scenario:
    return Scenario(
        kind=ScenarioKind.S2,
        uplink_rf=heavy_rf,
        fso_hops=(ew_hop, ew_hop),
        downlink_rf_users=(heavy_rf,) * 3,
        powers=NodePowers(1.0, 1.0, 1.0, 1.0),
    )


SMALL_S1_CONFIG = """\
[scenario]
kind = s1
gamma_out_dB = 7
n_users = 2
avg_snr_dB = 20

[powers]
P_G = 30
P_H1 = 30
P_H2 = 30

[uplink]
shadowing = heavy

[downlink]
shadowing = average

[fso]
distance_km = 100
cn2 = 1e-18

[sweep]
variable = avg_snr_per_hop_dB
start = 10
stop = 20
step = 10
metrics = op, capacity_ub
samples = 2000
seed = 3
"""


@pytest.fixture
def small_config_text() -> str:
    """Two-point s1 sweep, small enough for end-to-end runs."""
    return SMALL_S1_CONFIG


@pytest.fixture
def small_config(small_config_text: str) -> HapsConfig:
    return parse_config(small_config_text)
