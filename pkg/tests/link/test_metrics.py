import math

import numpy as np
import pytest
from scipy import integrate

from hapslink.link import EvaluationError, UnsupportedError, ValidationError
from hapslink.link.channels import (
    EwChannel,
    PointingError,
    ShadowedRicianChannel,
    ew_cdf_snr,
    ew_moment,
    ew_snr_mean,
    sr_mean,
)
from hapslink.link.metrics import (
    Method,
    MetricResult,
    ModulationScheme,
    asymptotic_op,
    ber_closed_form,
    ber_quadrature,
    diversity_order,
    energy_efficiency,
    ergodic_capacity_ub,
    fso_asymptotic,
    hop_means,
    log_ber_kernel,
    outage_probability,
    supports_ber_closed_form,
)
from hapslink.link.scenario import NodePowers, Scenario, ScenarioKind, system_cdf
from hapslink.link.settings import EvalSettings
from hapslink.link.units import db_to_linear

CBPSK = ModulationScheme.from_name("CBPSK")
DBPSK = ModulationScheme.from_name("dbpsk")


def integer_beta_hop(alpha: float, avg_snr: float) -> EwChannel:
    eta = 1.0 / ew_moment(alpha, 2.0, 1.0)
    return EwChannel(alpha, 2.0, eta, attenuation=math.exp(-0.05), avg_snr=avg_snr)


def integer_beta_scenario(kind: ScenarioKind, alpha: float, avg_snr: float, users: int) -> Scenario:
    rf = ShadowedRicianChannel.from_preset("heavy", avg_snr)
    hops = (integer_beta_hop(alpha, avg_snr),) * (1 if kind is ScenarioKind.S1 else 2)
    return Scenario(kind, rf, hops, (rf,) * users)


# Outage


def test_outage_probability_is_system_cdf(s1_scenario):
    result = outage_probability(s1_scenario, 7.0)
    assert result.method is Method.CLOSED_FORM
    assert result.value == pytest.approx(system_cdf(s1_scenario, db_to_linear(7.0)))


def test_asymptote_meets_exact_at_high_snr(s1_scenario):
    sc = s1_scenario.with_avg_snr(1e5)
    exact = outage_probability(sc, 7.0).value
    asymptotic = asymptotic_op(sc, 7.0)
    assert asymptotic.value == pytest.approx(exact, rel=0.02)
    assert set(asymptotic.details) == {"G-H1", "H1-H2", "H2-D"}


def test_fso_asymptote_with_pointing(ew_hop):
    pointing = PointingError(aperture_radius=0.1, beam_width_rx=2.5, jitter_sigma=0.3)
    hop = EwChannel(ew_hop.alpha, ew_hop.beta, ew_hop.eta, 0.9, 1e12, pointing)
    assert fso_asymptotic(hop, 5.0) == pytest.approx(ew_cdf_snr(hop, 5.0), rel=0.03)


def test_diversity_order(s1_scenario, heavy_rf):
    assert diversity_order(s1_scenario) == 1.0
    weak = EwChannel(alpha=0.8, beta=1.0, eta=1.0, avg_snr=100.0)
    sc = Scenario(ScenarioKind.S1, heavy_rf, (weak,), (heavy_rf,) * 3)
    assert diversity_order(sc) == pytest.approx(0.4)
    jittery = PointingError(aperture_radius=0.1, beam_width_rx=2.5, jitter_sigma=2.0)
    pointed = EwChannel(alpha=3.0, beta=2.0, eta=1.0, avg_snr=100.0, pointing=jittery)
    sc = Scenario(ScenarioKind.S1, heavy_rf, (pointed,), (heavy_rf,))
    assert diversity_order(sc) < 0.25


def _slope(sc: Scenario, low: float, high: float) -> float:
    op_low = outage_probability(sc.with_avg_snr(low), 7.0).value
    op_high = outage_probability(sc.with_avg_snr(high), 7.0).value
    return -(math.log10(op_high) - math.log10(op_low)) / (math.log10(high) - math.log10(low))


def test_rf_limited_slope(s1_scenario):
    assert _slope(s1_scenario, 1e5, 1e6) == pytest.approx(diversity_order(s1_scenario), rel=0.15)


def test_fso_limited_slope(heavy_rf):
    weak = EwChannel(alpha=0.8, beta=1.0, eta=1.0, avg_snr=100.0)
    sc = Scenario(ScenarioKind.S1, heavy_rf, (weak,), (heavy_rf,) * 3)
    assert _slope(sc, 1e6, 1e7) == pytest.approx(diversity_order(sc), rel=0.15)


# Bit error rate


@pytest.mark.parametrize("w, a, omega", [(0.5, 1.3, 0.2), (1.0, 0.7, 2.0), (3.5, 2.0, 0.01)])
def test_ber_kernel_beta_two(w, a, omega):
    expected = math.lgamma(w) - w * math.log(a + omega)
    assert log_ber_kernel(w, a, omega, 2) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("beta", [1, 3])
def test_ber_kernel_against_quadrature(beta):
    w, a, omega = 1.5, 0.8, 0.6
    direct, _ = integrate.quad(
        lambda g: g ** (w - 1.0) * math.exp(-a * g - omega * g ** (beta / 2.0)), 0.0, np.inf
    )
    assert math.exp(log_ber_kernel(w, a, omega, beta)) == pytest.approx(direct, rel=1e-6)


def test_ber_kernel_without_optical_term():
    assert log_ber_kernel(2.0, 0.5, 0.0, 2) == pytest.approx(math.lgamma(2.0) - 2.0 * math.log(0.5))


def test_ber_quadrature_edges(s1_scenario):
    weak = ber_quadrature(s1_scenario.with_avg_snr(1e-3), DBPSK)
    assert weak.value == pytest.approx(0.5, abs=1e-3)
    strong = ber_quadrature(s1_scenario.with_avg_snr(1e4), CBPSK)
    assert 0.0 < strong.value < 1e-2
    assert strong.method is Method.QUADRATURE


@pytest.mark.parametrize("kind", [ScenarioKind.S1, ScenarioKind.S2])
@pytest.mark.parametrize("mod", [CBPSK, DBPSK])
@pytest.mark.parametrize("avg_snr", [3.0, 30.0, 300.0])
def test_ber_closed_form_exact_series(kind, mod, avg_snr):
    sc = integer_beta_scenario(kind, 2.0, avg_snr, 2)
    assert supports_ber_closed_form(sc) is None
    closed = ber_closed_form(sc, mod)
    assert closed.method is Method.CLOSED_FORM
    assert closed.terms_used is not None and closed.terms_used > 0
    assert closed.value == pytest.approx(ber_quadrature(sc, mod).value, abs=1e-6)


def test_ber_closed_form_truncated_series():
    sc = integer_beta_scenario(ScenarioKind.S1, 3.5, 30.0, 2)
    closed = ber_closed_form(sc, CBPSK)
    assert closed.value == pytest.approx(ber_quadrature(sc, CBPSK).value, abs=1e-5)


def test_ber_closed_form_domain(s1_scenario, average_rf):
    reason = supports_ber_closed_form(s1_scenario)
    assert reason is not None and "integer" in reason
    with pytest.raises(UnsupportedError):
        ber_closed_form(s1_scenario, CBPSK)
    sc = integer_beta_scenario(ScenarioKind.S1, 2.0, 30.0, 2)
    mixed = Scenario(sc.kind, sc.uplink_rf, sc.fso_hops, (sc.uplink_rf, average_rf))
    assert "share one channel" in supports_ber_closed_form(mixed)


def test_modulation_table():
    assert (CBPSK.u, CBPSK.v) == (0.5, 1.0)
    assert (DBPSK.u, DBPSK.v) == (1.0, 1.0)
    assert ModulationScheme.from_name("nbfsk").v == 0.5
    with pytest.raises(ValidationError):
        ModulationScheme.from_name("QPSK")


# Capacity and energy efficiency


def test_capacity_upper_bound(s1_scenario):
    result = ergodic_capacity_ub(s1_scenario)
    means = hop_means(s1_scenario)
    assert means["G-H1"] == pytest.approx(sr_mean(s1_scenario.uplink_rf))
    assert means["H1-H2"] == pytest.approx(ew_snr_mean(s1_scenario.fso_hops[0]))
    assert result.value == pytest.approx(math.log2(1.0 + min(means.values())) / 3.0)


def test_capacity_upper_bound_grows_with_snr(s2_scenario):
    low = ergodic_capacity_ub(s2_scenario).value
    high = ergodic_capacity_ub(s2_scenario.with_avg_snr(1e3)).value
    assert high > low


def test_energy_efficiency(s1_scenario, s2_scenario):
    ee = energy_efficiency(s1_scenario)
    assert ee.value == pytest.approx(ergodic_capacity_ub(s1_scenario).value)
    assert ee.details["average_power_W"] == pytest.approx(1.0)
    louder = Scenario(
        s2_scenario.kind, s2_scenario.uplink_rf, s2_scenario.fso_hops,
        s2_scenario.downlink_rf_users, powers=NodePowers(2.0, 2.0, 2.0, 2.0),
    )
    assert energy_efficiency(louder).value == pytest.approx(energy_efficiency(s2_scenario).value / 2.0)


def test_energy_efficiency_needs_powers(s1_scenario, s2_scenario):
    bare = Scenario(s1_scenario.kind, s1_scenario.uplink_rf, s1_scenario.fso_hops, s1_scenario.downlink_rf_users)
    with pytest.raises(EvaluationError) as info:
        energy_efficiency(bare)
    assert info.value.metric == "ee"
    no_satellite = Scenario(
        s2_scenario.kind, s2_scenario.uplink_rf, s2_scenario.fso_hops,
        s2_scenario.downlink_rf_users, powers=NodePowers(1.0, 1.0, 1.0),
    )
    with pytest.raises(EvaluationError):
        energy_efficiency(no_satellite)
    silent = Scenario(
        s1_scenario.kind, s1_scenario.uplink_rf, s1_scenario.fso_hops,
        s1_scenario.downlink_rf_users, powers=NodePowers(0.0, 0.0, 0.0),
    )
    with pytest.raises(EvaluationError, match="zero"):
        energy_efficiency(silent)


def test_metric_result_rejects_negative():
    with pytest.raises(ValidationError):
        MetricResult(-0.1, Method.CLOSED_FORM)
    with pytest.raises(ValidationError):
        MetricResult(math.nan, Method.CLOSED_FORM)


def test_hop_failure_carries_metric_and_hop(heavy_rf):
    hop = EwChannel(alpha=0.5, beta=0.5, eta=1.0, avg_snr=1.0)
    strict = EvalSettings(ew_method="series", max_terms=3, truncation_tol=1e-12)
    sc = Scenario(ScenarioKind.S1, heavy_rf, (hop,), (heavy_rf,), settings=strict)
    with pytest.raises(EvaluationError) as info:
        outage_probability(sc, 0.0)
    assert info.value.metric == "op"
    assert info.value.hop == "H1-H2"
    assert str(info.value).startswith("metric=op hop=H1-H2 ")
