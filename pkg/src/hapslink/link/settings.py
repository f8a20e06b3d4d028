from dataclasses import dataclass
from typing import Literal

from hapslink.link import ValidationError

EwMethod = Literal["closed", "series"]
PointingMethod = Literal["quadrature", "meijer"]


@dataclass(frozen=True)
class EvalSettings:
    """Numerical knobs shared by every closed-form evaluator.

    ``max_terms``/``series_rtol`` govern the binomial and Meijer-G series; a series that
    hits the cap with a last term above ``truncation_tol`` raises instead of returning.
    """

    max_terms: int = 50
    series_rtol: float = 1e-9
    truncation_tol: float = 1e-6
    ew_method: EwMethod = "closed"
    pointing_method: PointingMethod = "quadrature"
    horizontal_exponent: float = 11.0 / 6.0
    quad_epsabs: float = 1e-12
    quad_epsrel: float = 1e-10
    meijer_rtol: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ValidationError(f"max_terms must be >= 1, got {self.max_terms}")
        if self.ew_method not in ("closed", "series"):
            raise ValidationError(f"unknown EW CDF method {self.ew_method!r}")
        if self.pointing_method not in ("quadrature", "meijer"):
            raise ValidationError(f"unknown pointing CDF method {self.pointing_method!r}")


DEFAULT_SETTINGS = EvalSettings()
