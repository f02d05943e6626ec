"""Channel primitives shared by the analytic and Monte Carlo pipelines.

Everything here is a pure function of its arguments and broadcasts over
numpy arrays. Gains are linear; use :func:`db_to_linear` at the boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LinkState(enum.Enum):
    LOS = "LoS"
    NLOS = "NLoS"


@dataclass(frozen=True)
class ChannelParams:
    """Blockage and path-loss constants (linear gains, exponents, 1/m rate)."""

    k_los: float = 10.0 ** (-75.96 / 10.0)
    k_nlos: float = 10.0 ** (-90.96 / 10.0)
    alpha_los: float = 2.0
    alpha_nlos: float = 3.2
    beta: float = 1.0 / 140.0

    def __post_init__(self) -> None:
        if not (self.k_los > 0 and self.k_nlos > 0):
            raise ValueError("channel gains k_los and k_nlos must be positive")
        if not self.alpha_los > 0:
            raise ValueError("alpha_los must be positive")
        if self.alpha_nlos < self.alpha_los:
            raise ValueError("alpha_nlos must be >= alpha_los")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def gain(self, state: LinkState) -> float:
        return self.k_los if state is LinkState.LOS else self.k_nlos

    def exponent(self, state: LinkState) -> float:
        return self.alpha_los if state is LinkState.LOS else self.alpha_nlos


def db_to_linear(v):
    out = 10.0 ** (np.asarray(v, dtype=float) / 10.0)
    return out if out.ndim else float(out)


def linear_to_db(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("linear value must be positive to convert to dB")
    out = 10.0 * np.log10(x)
    return out if out.ndim else float(out)


def los_probability(r, beta: float):
    """exp(-beta r); raises on negative distances."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    out = np.exp(-beta * r)
    return out if out.ndim else float(out)


def _check_positive(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        # r = 0 is a power-law singularity; never clamp it away
        raise ValueError("distance must be strictly positive for a power-law path loss")
    return r


def comm_path_loss(r, state: LinkState, ch: ChannelParams):
    """K_i r^-alpha_i for the given link state."""
    r = _check_positive(r)
    out = ch.gain(state) * r ** (-ch.exponent(state))
    return out if out.ndim else float(out)


def sensing_path_loss(r, ch: ChannelParams):
    """Monostatic round trip: K_L r^(-2 alpha_L). Sensing is LoS only."""
    r = _check_positive(r)
    out = ch.k_los * r ** (-2.0 * ch.alpha_los)
    return out if out.ndim else float(out)
