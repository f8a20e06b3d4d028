"""Full-size checks of the analytic metrics against simulation.

Deselected by default; run with ``pytest -m slow``.
"""

import math

import numpy as np
import pytest

from hapslink.link.channels import EwChannel, ShadowedRicianChannel, ew_fit, ew_moment
from hapslink.link.config import build_scenario, parse_config
from hapslink.link.metrics import (
    ModulationScheme,
    ber_closed_form,
    ber_quadrature,
    energy_efficiency,
    ergodic_capacity_ub,
    outage_probability,
    supports_ber_closed_form,
)
from hapslink.link.montecarlo import McConfig, mc_ber, mc_capacity, mc_outage
from hapslink.link.scenario import NodePowers, Scenario, ScenarioKind
from hapslink.link.units import db_to_linear

pytestmark = pytest.mark.slow

SAMPLES = 1_000_000


def chain(kind: str, preset: str, users: int, avg_dB: float) -> Scenario:
    avg = db_to_linear(avg_dB)
    rf = ShadowedRicianChannel.from_preset(preset, avg)
    alpha, beta, eta = ew_fit(0.2)
    hop = EwChannel(alpha, beta, eta, attenuation=math.exp(-0.1), avg_snr=avg)
    kind = ScenarioKind(kind)
    hops = (hop,) if kind is ScenarioKind.S1 else (hop, hop)
    return Scenario(kind, rf, hops, (rf,) * users)


@pytest.mark.parametrize(
    "kind, preset, users, avg_dB",
    [
        ("s1", "heavy", 1, 15.0),
        ("s1", "average", 5, 10.0),
        ("s1", "light", 10, 10.0),
        ("s2", "heavy", 1, 15.0),
        ("s2", "average", 5, 10.0),
        ("s2", "light", 10, 10.0),
    ],
)
def test_outage_matches_simulation(kind, preset, users, avg_dB):
    sc = chain(kind, preset, users, avg_dB)
    exact = outage_probability(sc, 7.0).value
    if exact < 1e-5:
        pytest.skip(f"OP={exact:.2e} is below the range simulation resolves")
    simulated = mc_outage(sc, 7.0, McConfig(samples=SAMPLES, master_seed=101, workers=4))
    standard_error = math.sqrt(exact * (1.0 - exact) / SAMPLES)
    assert abs(simulated.value - exact) <= 3.0 * standard_error


FITTED_S1_TEXT = """\
[scenario]
kind = s1
gamma_out_dB = 7
n_users = 3
avg_snr_dB = 20
modulation = CBPSK

[powers]
P_G = 30
P_H1 = 30
P_H2 = 30

[uplink]
shadowing = heavy

[downlink]
shadowing = heavy

[fso]
distance_km = 200
cn2 = 1e-18

[sweep]
variable = avg_snr_per_hop_dB
start = 0
stop = 30
step = 5
metrics = ber
"""


@pytest.mark.parametrize("modulation", ["CBPSK", "DBPSK"])
@pytest.mark.parametrize("avg_dB", [5.0, 10.0, 15.0, 20.0])
def test_ber_chain_fitted_hop(modulation, avg_dB):
    mod = ModulationScheme.from_name(modulation)
    sc = build_scenario(parse_config(FITTED_S1_TEXT), "avg_snr_per_hop_dB", avg_dB)
    quadrature = ber_quadrature(sc, mod).value
    reason = supports_ber_closed_form(sc)
    if reason is None:
        assert ber_closed_form(sc, mod).value == pytest.approx(quadrature, abs=1e-5)
    else:
        assert "beta" in reason
    simulated = mc_ber(sc, mod, McConfig(samples=SAMPLES, master_seed=212, workers=4))
    assert simulated.ci_halfwidth is not None
    assert abs(simulated.value - quadrature) <= 3.0 * simulated.ci_halfwidth


@pytest.mark.parametrize("modulation", ["CBPSK", "DBPSK"])
@pytest.mark.parametrize("avg_dB", [5.0, 10.0, 15.0, 20.0])
def test_ber_chain_integer_beta(modulation, avg_dB):
    mod = ModulationScheme.from_name(modulation)
    avg = db_to_linear(avg_dB)
    rf = ShadowedRicianChannel.from_preset("heavy", avg)
    eta = 1.0 / ew_moment(2.0, 2.0, 1.0)
    hop = EwChannel(2.0, 2.0, eta, attenuation=math.exp(-0.05), avg_snr=avg)
    sc = Scenario(ScenarioKind.S1, rf, (hop,), (rf,) * 3)

    quadrature = ber_quadrature(sc, mod).value
    assert ber_closed_form(sc, mod).value == pytest.approx(quadrature, abs=1e-5)
    simulated = mc_ber(sc, mod, McConfig(samples=SAMPLES, master_seed=202, workers=4))
    assert simulated.ci_halfwidth is not None
    assert abs(simulated.value - quadrature) <= 3.0 * simulated.ci_halfwidth


@pytest.mark.parametrize("kind", ["s1", "s2"])
@pytest.mark.parametrize("preset", ["heavy", "average"])
def test_capacity_bound_holds(kind, preset):
    sc = chain(kind, preset, 3, 20.0)
    bound = ergodic_capacity_ub(sc).value
    simulated = mc_capacity(sc, McConfig(samples=SAMPLES, master_seed=303, workers=4))
    assert simulated.value <= bound


def test_energy_efficiency_peaks_inside_power_sweep(small_config):
    grid = np.arange(-10.0, 55.0, 5.0)
    ee = np.array(
        [energy_efficiency(build_scenario(small_config, "P_G_dBm", p)).value for p in grid]
    )
    peak = int(np.argmax(ee))
    assert 0 < peak < len(grid) - 1
    assert np.all(np.diff(ee[: peak + 1]) >= 0.0)
    assert np.all(np.diff(ee[peak:]) <= 0.0)


def test_single_satellite_hop_chain_is_more_efficient(heavy_rf, ew_hop):
    powers = NodePowers(1.0, 1.0, 1.0, 1.0)
    s1 = Scenario(ScenarioKind.S1, heavy_rf, (ew_hop,), (heavy_rf,) * 3, powers=powers)
    s2 = Scenario(ScenarioKind.S2, heavy_rf, (ew_hop, ew_hop), (heavy_rf,) * 3, powers=powers)
    assert energy_efficiency(s1).value > energy_efficiency(s2).value


@pytest.mark.xfail(
    reason="the min-of-stage-means bound sits about 24% above the simulated capacity "
    "with heavy shadowing at 20 dB",
    strict=False,
)
@pytest.mark.parametrize("kind", ["s1", "s2"])
def test_capacity_bound_is_tight(kind):
    sc = chain(kind, "heavy", 5, 20.0)
    bound = ergodic_capacity_ub(sc).value
    simulated = mc_capacity(sc, McConfig(samples=SAMPLES, master_seed=313, workers=4))
    assert (bound - simulated.value) / simulated.value <= 0.10
