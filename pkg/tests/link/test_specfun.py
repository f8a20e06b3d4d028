import math

import mpmath
import pytest
from scipy import special

from hapslink.link import UnsupportedError, ValidationError
from hapslink.link.specfun import (
    MeijerGSpec,
    binomial_real,
    log_bessel_i0,
    meijer_g,
    meijer_g_scaled,
    pochhammer,
    scaled_product,
    sum_series,
    upper_gamma_regularized,
)


def mp_meijer(spec: MeijerGSpec) -> float:
    a, b = list(spec.a_params), list(spec.b_params)
    return float(
        mpmath.meijerg([a[: spec.n], a[spec.n :]], [b[: spec.m], b[spec.m :]], spec.argument)
    )


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 7.5])
def test_exponential_pattern(x):
    assert meijer_g(MeijerGSpec.exponential(x)) == pytest.approx(math.exp(-x), rel=1e-14)


@pytest.mark.parametrize("t1", [0.75, 2.5, 9.0])
@pytest.mark.parametrize("z", [0.05, 0.8, 3.0])
def test_pointing_pattern_matches_mpmath(t1, z):
    spec = MeijerGSpec.pointing_cdf(t1, z)
    assert spec.pattern == "G21_23"
    assert meijer_g(spec) == pytest.approx(mp_meijer(spec), rel=1e-6)


@pytest.mark.parametrize("beta", [1, 2, 3])
@pytest.mark.parametrize("w", [0.5, 1.0, 2.5])
@pytest.mark.parametrize("z", [0.01, 0.4, 6.0])
def test_ber_pattern_matches_mpmath(beta, w, z):
    spec = MeijerGSpec.ber_kernel(beta, w, z)
    assert spec.pattern == "G2b_b2"
    assert meijer_g(spec) == pytest.approx(mp_meijer(spec), rel=1e-6)


def test_scaled_form_recombines():
    spec = MeijerGSpec.pointing_cdf(2.5, 0.8)
    log_scale, value = meijer_g_scaled(spec)
    assert math.exp(log_scale) * value == pytest.approx(meijer_g(spec), rel=1e-12)
    assert scaled_product(math.log(3.0), (log_scale, value)) == pytest.approx(
        3.0 * meijer_g(spec), rel=1e-12
    )
    assert scaled_product(5.0, (1.0, 0.0)) == 0.0


def test_ber_kernel_needs_integer_beta():
    with pytest.raises(UnsupportedError):
        MeijerGSpec.ber_kernel(2.5, 1.0, 0.1)


def test_unsupported_pattern():
    spec = MeijerGSpec(1, 1, 1, 1, (0.5,), (0.0,), 1.0)
    with pytest.raises(UnsupportedError):
        meijer_g(spec)


def test_overlapping_pole_families():
    spec = MeijerGSpec(2, 1, 2, 3, (2.0, 1.0), (0.0, 0.5, -0.5), 1.0)
    with pytest.raises(UnsupportedError):
        meijer_g(spec)


def test_contour_needs_positive_argument():
    with pytest.raises(UnsupportedError):
        meijer_g(MeijerGSpec.pointing_cdf(2.0, 0.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(m=2, n=0, p=0, q=1, a_params=(), b_params=(0.0,)),
        dict(m=1, n=0, p=0, q=1, a_params=(), b_params=(0.0, 1.0)),
        dict(m=1, n=0, p=0, q=1, a_params=(), b_params=(0.0,), argument=-1.0),
        dict(m=1, n=0, p=0, q=1, a_params=(), b_params=(0.0,), argument=math.inf),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        MeijerGSpec(**kwargs)


def test_pochhammer():
    assert pochhammer(0.5, 0) == 1.0
    assert pochhammer(0.5, 3) == pytest.approx(1.875)
    assert pochhammer(-2.0, 3) == 0.0
    with pytest.raises(ValidationError):
        pochhammer(1.0, -1)


def test_binomial_real():
    assert binomial_real(2.5, 3) == pytest.approx(0.3125)
    assert binomial_real(3, 5) == 0.0
    assert binomial_real(4.2, 0) == 1.0
    assert binomial_real(2.5, 70) == pytest.approx(special.binom(2.5, 70), rel=1e-9)
    with pytest.raises(ValidationError):
        binomial_real(1.0, -2)


def test_sum_series_converges():
    summed = sum_series(lambda k: 0.5**k, rtol=1e-12, max_terms=100)
    assert summed.converged
    assert summed.value == pytest.approx(2.0, rel=1e-11)
    assert summed.terms_used < 100


def test_sum_series_reports_truncation():
    summed = sum_series(lambda k: (-1.0) ** k, max_terms=10)
    assert not summed.converged
    assert summed.terms_used == 10
    assert summed.last_term == -1.0


def test_sum_series_start_offset():
    summed = sum_series(lambda k: 1.0 / k**4, start=1, rtol=1e-10, max_terms=10_000)
    assert summed.value == pytest.approx(math.pi**4 / 90.0, rel=1e-6)


def test_upper_gamma_regularized():
    assert upper_gamma_regularized(1.0, 2.0) == pytest.approx(math.exp(-2.0))
    assert upper_gamma_regularized(0.5, 0.0) == 1.0


@pytest.mark.parametrize("x", [0.0, 0.4, 12.0, 900.0])
def test_log_bessel_i0_matches_mpmath(x):
    expected = float(mpmath.log(mpmath.besseli(0, x)))
    assert float(log_bessel_i0(x)) == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_log_bessel_i0_rejects_negative():
    with pytest.raises(ValidationError):
        log_bessel_i0(-1.0)
