"""Special functions used by every closed-form expression.

Gamma-family helpers are thin wrappers over ``scipy.special`` so the rest of the
package has one import site. The Meijer-G evaluator is restricted to the three
parameter patterns the link expressions need and integrates the Mellin-Barnes
representation along a vertical contour.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from hapslink.link import MeijerGConvergenceError, UnsupportedError, ValidationError

logger = logging.getLogger(__name__)

# Integer-pole touch between the two pole families is resolved by this shift.
POLE_PERTURBATION = 1e-6

# Contour is cut where |integrand| has fallen this many e-folds below its reference.
_CONTOUR_TAIL_EFOLDS = 46.0
_CONTOUR_MAX_T = 1e5


def gamma(x: float) -> float:
    return float(special.gamma(x))


def log_gamma(x: float) -> float:
    """log|Γ(x)|."""
    return float(special.gammaln(x))


def gamma_sign(x: float) -> float:
    return float(special.gammasgn(x))


def erf(x: float) -> float:
    return float(special.erf(x))


def log_bessel_i0(x: ArrayLike) -> NDArray[np.float64]:
    """log I₀(x) for x ≥ 0 through the exponentially scaled ``i0e``."""
    values = np.asarray(x, dtype=np.float64)
    if np.any(values < 0.0):
        raise ValidationError("log_bessel_i0 needs a non-negative argument")
    return np.log(np.asarray(special.i0e(values), dtype=np.float64)) + values


def upper_gamma_regularized(a: float, x: float) -> float:
    """Γ(a, x)/Γ(a) for a > 0."""
    return float(special.gammaincc(a, x))


def pochhammer(x: float, j: int) -> float:
    """Rising factorial x(x+1)...(x+j-1); 1 for j = 0."""
    if j < 0:
        raise ValidationError(f"pochhammer order must be non-negative, got {j}")
    result = 1.0
    for i in range(j):
        result *= x + i
    return result


_FALLING_PRODUCT_LIMIT = 64


def binomial_real(alpha: float, rho: int) -> float:
    """Generalised binomial coefficient C(alpha, rho) for real alpha."""
    if rho < 0:
        raise ValidationError(f"binomial lower index must be non-negative, got {rho}")
    if float(alpha).is_integer() and alpha >= 0 and rho > alpha:
        return 0.0
    if rho <= _FALLING_PRODUCT_LIMIT:
        result = 1.0
        for i in range(rho):
            result *= (alpha - i) / (i + 1)
        return result
    sign = gamma_sign(alpha + 1.0) * gamma_sign(alpha - rho + 1.0)
    log_value = log_gamma(alpha + 1.0) - log_gamma(rho + 1.0) - log_gamma(alpha - rho + 1.0)
    return sign * math.exp(log_value)


@dataclass(frozen=True)
class SeriesSum:
    """Partial sum of a truncated series plus how it stopped."""

    value: float
    terms_used: int
    converged: bool
    last_term: float = 0.0


def sum_series(
    term: Callable[[int], float],
    max_terms: int = 50,
    rtol: float = 1e-9,
    start: int = 0,
    min_terms: int = 2,
) -> SeriesSum:
    """Sum term(k) for k = start, start+1, ... until |term| <= rtol·|partial sum|.

    Stops at ``max_terms`` terms whatever happens; ``converged`` says which way it ended.
    """
    total = 0.0
    last = 0.0
    for count in range(1, max_terms + 1):
        last = term(start + count - 1)
        total += last
        if count >= min_terms and abs(last) <= rtol * abs(total):
            return SeriesSum(total, count, True, last)
    return SeriesSum(total, max_terms, False, last)


@dataclass(frozen=True)
class MeijerGSpec:
    """Parameters of G^{m,n}_{p,q}(argument | a_params; b_params)."""

    m: int
    n: int
    p: int
    q: int
    a_params: Tuple[float, ...] = field(default_factory=tuple)
    b_params: Tuple[float, ...] = field(default_factory=tuple)
    argument: float = 0.0

    def __post_init__(self) -> None:
        if min(self.m, self.n, self.p, self.q) < 0:
            raise ValidationError("Meijer-G orders must be non-negative")
        if self.m > self.q or self.n > self.p:
            raise ValidationError(
                f"Meijer-G requires m <= q and n <= p, got m={self.m}, n={self.n}, "
                f"p={self.p}, q={self.q}"
            )
        if len(self.a_params) != self.p or len(self.b_params) != self.q:
            raise ValidationError(
                f"expected {self.p} a-parameters and {self.q} b-parameters, got "
                f"{len(self.a_params)} and {len(self.b_params)}"
            )
        if not self.argument >= 0 or not math.isfinite(self.argument):
            raise ValidationError(f"Meijer-G argument must be finite and >= 0, got {self.argument}")

    @property
    def pattern(self) -> str:
        orders = (self.m, self.n, self.p, self.q)
        if orders == (1, 0, 0, 1):
            return "G10_01"
        if orders == (2, 1, 2, 3):
            return "G21_23"
        if self.m == 2 and self.q == 2 and self.n == self.p and self.n >= 1:
            return "G2b_b2"
        raise UnsupportedError(f"unsupported Meijer-G pattern G^{{{self.m},{self.n}}}_{{{self.p},{self.q}}}")

    @classmethod
    def exponential(cls, x: float) -> "MeijerGSpec":
        """exp(-x) = G^{1,0}_{0,1}(x | -; 0)."""
        return cls(1, 0, 0, 1, (), (0.0,), x)

    @classmethod
    def pointing_cdf(cls, t1: float, z: float) -> "MeijerGSpec":
        """G^{2,1}_{2,3}(z | 1-T1, 1; 0, 1-T1, -T1) of the EW x pointing-error CDF."""
        return cls(2, 1, 2, 3, (1.0 - t1, 1.0), (0.0, 1.0 - t1, -t1), z)

    @classmethod
    def ber_kernel(cls, beta: int, w: float, z: float) -> "MeijerGSpec":
        """G^{2,β}_{β,2}(z | (1-w)/β, ..., (β-w)/β; 0, 1/2) of the BER closed forms."""
        if beta < 1 or int(beta) != beta:
            raise UnsupportedError(f"BER Meijer-G kernel needs an integer beta >= 1, got {beta}")
        beta = int(beta)
        a_params = tuple((k - w) / beta for k in range(1, beta + 1))
        return cls(2, beta, beta, 2, a_params, (0.0, 0.5), z)


def _contour_abscissa(spec: MeijerGSpec) -> Tuple[MeijerGSpec, float]:
    lower = max((a - 1.0 for a in spec.a_params[: spec.n]), default=-math.inf)
    upper = min(spec.b_params[: spec.m])
    if lower < upper:
        if math.isinf(lower):
            return spec, upper - 0.5
        return spec, 0.5 * (lower + upper)
    if lower - upper < POLE_PERTURBATION:
        shifted = tuple(
            b + POLE_PERTURBATION if i < spec.m else b for i, b in enumerate(spec.b_params)
        )
        logger.warning(
            f"Meijer-G pole families touch (gap {upper - lower:.3e}); shifting leading "
            f"b-parameters by {POLE_PERTURBATION:g}"
        )
        return _contour_abscissa(replace(spec, b_params=shifted))
    raise UnsupportedError(
        f"Meijer-G pole families overlap: max(a-1)={lower:.6g} >= min(b)={upper:.6g}"
    )


def _log_mellin_kernel(spec: MeijerGSpec) -> Callable[[complex], complex]:
    a, b, m, n = spec.a_params, spec.b_params, spec.m, spec.n

    def log_phi(s: complex) -> complex:
        total = 0j
        for j, bj in enumerate(b):
            total += special.loggamma(bj - s) if j < m else -special.loggamma(1.0 - bj + s)
        for j, aj in enumerate(a):
            total += special.loggamma(1.0 - aj + s) if j < n else -special.loggamma(aj - s)
        return complex(total)

    return log_phi


def meijer_g_scaled(
    spec: MeijerGSpec, rtol: float = 1e-8, atol: float = 1e-12
) -> Tuple[float, float]:
    """Return (log_scale, value) with G = exp(log_scale)·value.

    The contour integral is carried out relative to z^c·|Φ(c)| so that huge or tiny
    prefactors can be combined in log space by the caller.
    """
    pattern = spec.pattern
    z = spec.argument
    if pattern == "G10_01":
        b = spec.b_params[0]
        if z == 0.0:
            return (0.0, 1.0) if b == 0.0 else (0.0, 0.0)
        return b * math.log(z) - z, 1.0
    if z == 0.0:
        raise UnsupportedError("contour evaluation needs a strictly positive argument")

    spec, c = _contour_abscissa(spec)
    log_phi = _log_mellin_kernel(spec)
    log_z = math.log(z)
    reference = log_phi(complex(c, 0.0)).real

    t_max = 1.0
    while log_phi(complex(c, t_max)).real - reference > -_CONTOUR_TAIL_EFOLDS:
        t_max *= 2.0
        if t_max > _CONTOUR_MAX_T:
            raise MeijerGConvergenceError(
                f"Mellin-Barnes integrand of {pattern} does not decay along Re(s)={c:.6g}"
            )

    def integrand(t: float) -> float:
        value = np.exp(log_phi(complex(c, t)) - reference + 1j * t * log_z)
        return float(value.real)

    oscillations = int(t_max * abs(log_z) / math.pi) + 1
    limit = max(200, 4 * oscillations + 50)
    outcome = integrate.quad(
        integrand, 0.0, t_max, epsabs=0.1 * atol, epsrel=0.1 * rtol, limit=limit, full_output=1
    )
    total, abserr = float(outcome[0]), float(outcome[1])
    if abserr > max(rtol * abs(total), atol):
        raise MeijerGConvergenceError(
            f"contour quadrature of {pattern} at z={z:.6g} reached error {abserr:.3e} "
            f"for value {total:.6e}"
        )
    return c * log_z + reference, total / math.pi


def meijer_g(spec: MeijerGSpec, rtol: float = 1e-8) -> float:
    """Evaluate a supported real-argument Meijer-G function."""
    log_scale, value = meijer_g_scaled(spec, rtol=rtol)
    if value == 0.0:
        return 0.0
    return math.copysign(math.exp(log_scale + math.log(abs(value))), value)


def scaled_product(log_terms: float, scaled: Tuple[float, float]) -> float:
    """exp(log_terms)·G where G is given as (log_scale, value) by meijer_g_scaled."""
    log_scale, value = scaled
    if value == 0.0:
        return 0.0
    return math.copysign(math.exp(log_terms + log_scale + math.log(abs(value))), value)

