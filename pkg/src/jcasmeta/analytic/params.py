from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..propagation import ChannelParams


class AnalyticError(ArithmeticError):
    pass


class SeriesDivergenceError(AnalyticError):
    """The moment-mixing series did not settle; ``partial`` holds the last partial sum."""

    def __init__(self, message: str, partial: complex, terms_used: int):
        self.partial = partial
        self.terms_used = terms_used
        super().__init__(message)


class InversionError(AnalyticError):
    def __init__(self, message: str, diagnostics: dict):
        self.diagnostics = diagnostics
        super().__init__(message)


@dataclass(frozen=True)
class NetworkParams:
    """Densities (1/m^2) of base stations, users and sensed objects plus the channel."""

    lambda_b: float = 1e-4
    lambda_u: float = 1e-3
    lambda_s: float = 1e-3
    channel: ChannelParams = field(default_factory=ChannelParams)

    def __post_init__(self) -> None:
        if not self.lambda_b > 0:
            raise ValueError("lambda_b must be positive")
        if self.lambda_u < 0 or self.lambda_s < 0:
            raise ValueError("lambda_u and lambda_s must be non-negative")
        if self.lambda_u + self.lambda_s <= 0:
            raise ValueError("lambda_u + lambda_s must be positive")
        for name in ("lambda_u", "lambda_s"):
            v = getattr(self, name)
            if 0 < v < 5 * self.lambda_b:
                warnings.warn(
                    f"{name}={v:g} is not much larger than lambda_b={self.lambda_b:g}; "
                    "the model assumes every cell holds several users and objects",
                    stacklevel=3,
                )

    @property
    def weights(self) -> tuple[float, float]:
        """Mixing weights (user, sensed-object) of the joint coverage."""
        tot = self.lambda_u + self.lambda_s
        return self.lambda_u / tot, self.lambda_s / tot

    @property
    def los_exist_exponent(self) -> float:
        """2 pi lambda_b / beta^2, the mean number of LoS base stations seen from a point."""
        return 2.0 * math.pi * self.lambda_b / self.channel.beta**2

    @property
    def los_exist_probability(self) -> float:
        return -math.expm1(-self.los_exist_exponent)


@dataclass(frozen=True)
class SirThresholds:
    theta_c: float
    theta_s: float

    def __post_init__(self) -> None:
        if not (self.theta_c > 0 and self.theta_s > 0):
            raise ValueError("SIR thresholds must be positive (linear scale)")

    @classmethod
    def from_db(cls, theta_c_db: float, theta_s_db: float) -> "SirThresholds":
        return cls(10.0 ** (theta_c_db / 10.0), 10.0 ** (theta_s_db / 10.0))

    @property
    def theta_c_db(self) -> float:
        return 10.0 * math.log10(self.theta_c)

    @property
    def theta_s_db(self) -> float:
        return 10.0 * math.log10(self.theta_s)


@dataclass(frozen=True)
class ComplexMoment:
    order: complex
    value: complex
    series_terms_used: int = 0
    quadrature_converged: bool = True

    @property
    def omega(self) -> float:
        return float(np.imag(self.order))


@dataclass
class MetaCurve:
    """Analytic CCDF of a conditional coverage probability on a reliability grid."""

    family: str
    theta_c_db: float | None
    theta_s_db: float | None
    x: np.ndarray
    f_value: np.ndarray
    method: str = "gil-pelaez"
    errors: list = field(default_factory=list)
    omega_max: float = float("nan")

    @property
    def grid(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.x, self.f_value)]
