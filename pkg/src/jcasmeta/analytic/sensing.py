"""Moments of the sensed-object conditional coverage.

The radar return of the serving base station at distance ``r0`` competes
with interferers that are reflected by the same object.  Interferers inside
the serving disc around the object are thinned by an exclusion term ``J``
that depends on both distances.
"""

from __future__ import annotations

import math

import numpy as np

from ..propagation import LinkState
from ..quadrature import (
    DEFAULT_SPEC,
    QuadratureSpec,
    integrate_finite,
    integrate_semi_infinite,
)
from ._kernel import as_orders, chunk_rows, geometric_points, log1p_power, mean_spacing, sir_kernel
from .params import ComplexMoment, NetworkParams


def _los_ball_survival(r0, beta: float, c: float):
    """P(no LoS base station within r0) for LoS density 2 pi lambda r e^(-beta r)."""
    x = beta * np.asarray(r0, dtype=float)
    # 1 - e^-x (1 + x), written to keep precision for small x
    inside = -np.expm1(-x) - x * np.exp(-x)
    return np.exp(-c * inside)


def _j_batch(r: np.ndarray, r0: np.ndarray, beta: float, spec: QuadratureSpec) -> np.ndarray:
    r = np.asarray(r, dtype=float).ravel()
    r0 = np.asarray(r0, dtype=float).ravel()
    out = np.zeros(r.size)
    act = r < 2.0 * r0
    if not act.any():
        return out
    ra, r0a = r[act], r0[act]
    width = 0.5 * math.pi - np.arcsin(np.clip(ra / (2.0 * r0a), 0.0, 1.0))
    diff2 = (ra - r0a) ** 2
    prod = 4.0 * ra * r0a

    def g(s):
        # |X - X0|^2 = (r - r0)^2 + 2 r r0 (1 - sin phi), phi = pi/2 - width (1 - s)
        half = 0.5 * width[None, :] * (1.0 - s[:, None])
        d = np.sqrt(diff2[None, :] + prod[None, :] * np.sin(half) ** 2)
        return np.exp(-beta * d)

    res = integrate_finite(g, 0.0, 1.0, spec=spec)
    out[act] = width * np.atleast_1d(res.value)
    return out


def j_exclusion_integral(r: float, r0: float, beta: float, spec: QuadratureSpec | None = None) -> float:
    """Integral over u in [r/(2 r0), 1] of exp(-beta sqrt(r^2 - 2 r r0 u + r0^2)) / sqrt(1 - u^2).

    Zero when ``r >= 2 r0``.  Evaluated with ``u = sin(phi)``, which removes
    the inverse square root at ``u = 1``.
    """
    if r < 0 or r0 <= 0:
        raise ValueError("need r >= 0 and r0 > 0")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return float(_j_batch(np.array([r]), np.array([r0]), beta, spec or DEFAULT_SPEC)[0])


def sensing_interferer_intensity(r, r0: float, state: LinkState, params: NetworkParams, spec: QuadratureSpec | None = None):
    """Radial intensity (per metre) of interferers in ``state`` at distance ``r`` from the object."""
    spec = spec or DEFAULT_SPEC
    beta = params.channel.beta
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or r0 <= 0:
        raise ValueError("need r >= 0 and r0 > 0")
    flat = r.ravel()
    j = _j_batch(flat, np.full(flat.size, float(r0)), beta, spec).reshape(r.shape)
    p_los = np.exp(-beta * r)
    p = p_los if state is LinkState.LOS else -np.expm1(-beta * r)
    out = 2.0 * p * params.lambda_b * r * (math.pi - j)
    return out if out.ndim else float(out)


def sensing_serving_pdf(r0, params: NetworkParams):
    """Density of the nearest LoS base-station distance; integrates to 1 - e^(-c)."""
    beta = params.channel.beta
    r0 = np.asarray(r0, dtype=float)
    if np.any(r0 < 0):
        raise ValueError("distance must be non-negative")
    c = params.los_exist_exponent
    out = 2.0 * math.pi * params.lambda_b * r0 * np.exp(-beta * r0) * _los_ball_survival(r0, beta, c)
    return out if out.ndim else float(out)


def _sensing_exponent(r0: np.ndarray, b: np.ndarray, theta_s: float, params: NetworkParams, spec: QuadratureSpec) -> np.ndarray:
    """Sum over link states of the interferer Laplacian exponent, shape (len(r0), len(b))."""
    ch = params.channel
    lam, beta = params.lambda_b, ch.beta
    n0, nb = r0.size, b.size
    log_r0 = np.log(r0)
    terms = []
    for k, alpha in ((ch.k_los, ch.alpha_los), (ch.k_nlos, ch.alpha_nlos)):
        terms.append((math.log(theta_s * k / ch.k_los) + 2.0 * ch.alpha_los * log_r0, alpha))

    def accumulate(r, weight_los, weight_nlos):
        log_r = np.log(r)
        acc = 0.0
        for (log_coef, alpha), w in zip(terms, (weight_los, weight_nlos)):
            acc = acc + sir_kernel(log1p_power(log_coef[None, :], alpha, log_r), b) * w[..., None]
        return acc.reshape(r.shape[0], n0 * nb)

    # below rho the kernel (|.| <= 2) and the intensity (<= 2 pi lambda r) contribute
    # less than 2 pi lambda rho^2, so the log-spaced inner range can stop there
    rho = math.sqrt(spec.abs_tol / (2.0 * math.pi * lam))
    s_min = -max(1.0, math.log(2.0 * float(r0.max()) / rho))

    def inside(s):
        # r = 2 r0 e^s, s < 0: the disc where the exclusion term is active
        r = 2.0 * r0[None, :] * np.exp(s)[:, None]
        j = _j_batch(r, np.broadcast_to(r0, r.shape), beta, spec).reshape(r.shape)
        base = 2.0 * lam * r * r * (math.pi - j)
        p_los = np.exp(-beta * r)
        return accumulate(r, base * p_los, base * -np.expm1(-beta * r))

    def outside(s):
        r = 2.0 * r0[None, :] * np.exp(s)[:, None]
        base = 2.0 * math.pi * lam * r * r
        p_los = np.exp(-beta * r)
        return accumulate(r, base * p_los, base * -np.expm1(-beta * r))

    # J has a square-root edge at r = 2 r0
    a = integrate_finite(inside, s_min, 0.0, spec=spec, endpoint_singular=True)
    o = integrate_semi_infinite(outside, 0.0, decay_hint=1.0, spec=spec)
    return (np.asarray(a.value) + np.asarray(o.value)).reshape(n0, nb), a.converged and o.converged


def _serving_cutoff(params: NetworkParams, tol: float = 1e-10) -> float:
    beta = params.channel.beta
    c = params.los_exist_exponent
    mass = params.los_exist_probability
    R = 1.0 / beta
    while _los_ball_survival(R, beta, c) - math.exp(-c) > tol * mass:
        R *= 2.0
    return R


def sensing_moments(orders, theta_s: float, params: NetworkParams, spec: QuadratureSpec | None = None):
    """Moments of the sensing conditional coverage for an array of (complex) orders.

    Returns ``(values, converged)``.  Requires ``Re(b) >= 0``.
    """
    spec = spec or DEFAULT_SPEC
    b = as_orders(orders)
    if np.any(b.real < 0):
        raise ValueError("sensing moments need Re(b) >= 0")
    if not theta_s > 0:
        raise ValueError("theta_s must be positive")
    flags = [True]

    def outer(r0):
        out = np.empty((r0.size, b.size), dtype=complex)
        for sl in chunk_rows(r0.size, b.size):
            g, ok = _sensing_exponent(r0[sl], b, theta_s, params, spec)
            flags[0] = flags[0] and ok
            out[sl] = sensing_serving_pdf(r0[sl], params)[:, None] * np.exp(-g)
        return out

    R = _serving_cutoff(params)
    pts = geometric_points(0.25 * mean_spacing(params.lambda_b), R)
    res = integrate_finite(outer, 0.0, R, spec=spec, points=pts)
    mass = params.los_exist_probability
    values = np.exp((b - 1.0) * math.log(mass)) * np.atleast_1d(res.value)
    return values, bool(res.converged and flags[0])


def sensing_moment(b: complex, theta_s: float, params: NetworkParams, spec: QuadratureSpec | None = None) -> ComplexMoment:
    vals, ok = sensing_moments([b], theta_s, params, spec)
    return ComplexMoment(order=complex(b), value=complex(vals[0]), quadrature_converged=ok)
