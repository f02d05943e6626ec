"""Moments of the user conditional coverage.

A user associates with the base station of largest received power, which
may be LoS or NLoS.  Interferers of either state lie beyond the serving
distance ``r0``.
"""

from __future__ import annotations

import math

import numpy as np

from ..propagation import LinkState
from ..quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_finite, integrate_semi_infinite
from ._kernel import as_orders, chunk_rows, geometric_points, log1p_power, mean_spacing, sir_kernel
from .params import ComplexMoment, NetworkParams


def psi_los(r0, params: NetworkParams):
    """Distance of an NLoS base station as strong as a LoS one at ``r0``."""
    ch = params.channel
    r0 = np.asarray(r0, dtype=float)
    out = (ch.k_nlos / ch.k_los) ** (1.0 / ch.alpha_nlos) * r0 ** (ch.alpha_los / ch.alpha_nlos)
    return out if out.ndim else float(out)


def psi_nlos(r0, params: NetworkParams):
    """Distance of a LoS base station as strong as an NLoS one at ``r0``."""
    ch = params.channel
    r0 = np.asarray(r0, dtype=float)
    out = (ch.k_los / ch.k_nlos) ** (1.0 / ch.alpha_los) * r0 ** (ch.alpha_nlos / ch.alpha_los)
    return out if out.ndim else float(out)


def _los_mean(x, beta: float):
    # integral of r e^(-beta r) from x to infinity
    x = np.asarray(x, dtype=float)
    return np.exp(-beta * x) * (beta * x + 1.0) / beta**2


def _nlos_tail(r0, beta: float, lam: float):
    # integral of 2 pi lam r (1 - e^(-beta r)) over [0, r0]
    return 2.0 * math.pi * lam * (0.5 * r0 * r0 - (1.0 / beta**2 - _los_mean(r0, beta)))


def comm_association_pdfs(r0, state: LinkState, params: NetworkParams):
    """Density of the serving distance with the serving link in ``state``.

    The LoS and NLoS densities together integrate to one.
    """
    f_los, f_nlos = _association_pdfs(r0, params)
    return f_los if state is LinkState.LOS else f_nlos


def _association_pdfs(r0, params: NetworkParams):
    ch = params.channel
    lam, beta = params.lambda_b, ch.beta
    r0 = np.asarray(r0, dtype=float)
    if np.any(r0 < 0):
        raise ValueError("distance must be non-negative")
    two_pi_lam = 2.0 * math.pi * lam
    p_los = np.exp(-beta * r0)
    # LoS at r0: no LoS closer, no NLoS within psi_los(r0)
    void_los = (1.0 / beta**2 - _los_mean(r0, beta))
    f_los = two_pi_lam * r0 * p_los * np.exp(-two_pi_lam * void_los - _nlos_tail(psi_los(r0, params), beta, lam))
    # NLoS at r0: no NLoS closer, no LoS within psi_nlos(r0)
    void_cross = 1.0 / beta**2 - _los_mean(psi_nlos(r0, params), beta)
    f_nlos = two_pi_lam * r0 * -np.expm1(-beta * r0) * np.exp(-_nlos_tail(r0, beta, lam) - two_pi_lam * void_cross)
    if f_los.ndim == 0:
        return float(f_los), float(f_nlos)
    return f_los, f_nlos


def _comm_exponents(r0: np.ndarray, b: np.ndarray, theta_c: float, params: NetworkParams, spec: QuadratureSpec, share=None):
    """Interferer exponents for LoS and NLoS service, each of shape (len(r0), len(b)).

    ``share`` (shape (2, len(r0))) scales each serving state's integrand by its
    association share so that the absolute tolerance tracks the error it
    induces in the moment; the scaling is removed before returning.
    """
    ch = params.channel
    lam, beta = params.lambda_b, ch.beta
    n0, nb = r0.size, b.size
    log_r0 = np.log(r0)
    states = ((ch.k_los, ch.alpha_los), (ch.k_nlos, ch.alpha_nlos))
    if share is None:
        share = np.ones((2, n0))
    share = np.maximum(share, 1e-300)

    def inner(s):
        r = r0[None, :] * np.exp(s)[:, None]
        log_r = np.log(r)
        base = 2.0 * math.pi * lam * r * r
        w = (base * np.exp(-beta * r), base * -np.expm1(-beta * r))
        out = np.empty((s.size, 2, n0, nb), dtype=complex)
        for q, (k_srv, a_srv) in enumerate(states):
            acc = 0.0
            for (k_int, a_int), wi in zip(states, w):
                log_coef = math.log(theta_c * k_int / k_srv) + a_srv * log_r0
                acc = acc + sir_kernel(log1p_power(log_coef[None, :], a_int, log_r), b) * wi[..., None]
            out[:, q] = acc * share[q][None, :, None]
        return out.reshape(s.size, -1)

    res = integrate_semi_infinite(inner, 0.0, decay_hint=1.0, spec=spec)
    g = np.asarray(res.value).reshape(2, n0, nb) / share[:, :, None]
    return g[0], g[1], res.converged


def _cutoff(params: NetworkParams, tol: float = 1e-10) -> float | None:
    """Radius beyond which both association densities carry < tol mass, or None."""
    lam, beta = params.lambda_b, params.channel.beta
    R = 1.0 / beta
    for _ in range(60):
        if psi_nlos(R, params) >= R:
            bound = 2.0 * math.pi * lam * float(_los_mean(R, beta)) + math.exp(-math.pi * lam * R * R)
            if bound < tol:
                return R
        R *= 2.0
    return None


def comm_moments(orders, theta_c: float, params: NetworkParams, spec: QuadratureSpec | None = None):
    """Moments of the user conditional coverage for an array of orders; returns ``(values, converged)``.

    Orders with negative real part are allowed but may overflow, raising
    :class:`~jcasmeta.quadrature.NonFiniteIntegrandError`.
    """
    spec = spec or DEFAULT_SPEC
    b = as_orders(orders)
    if not theta_c > 0:
        raise ValueError("theta_c must be positive")
    flags = [True]

    def outer(r0):
        out = np.empty((r0.size, b.size), dtype=complex)
        for sl in chunk_rows(r0.size, 2 * b.size):
            f_los, f_nlos = _association_pdfs(r0[sl], params)
            with np.errstate(invalid="ignore"):
                share = np.stack([f_los, f_nlos]) / (f_los + f_nlos)
            share = np.where(np.isfinite(share), share, 1.0)
            g_los, g_nlos, ok = _comm_exponents(r0[sl], b, theta_c, params, spec, share)
            flags[0] = flags[0] and ok
            with np.errstate(over="ignore", invalid="ignore"):
                out[sl] = f_los[:, None] * np.exp(-g_los) + f_nlos[:, None] * np.exp(-g_nlos)
        return out

    scale = mean_spacing(params.lambda_b)
    R = _cutoff(params)
    if R is not None:
        res = integrate_finite(outer, 0.0, R, spec=spec, points=geometric_points(0.25 * scale, R))
    else:
        res = integrate_semi_infinite(outer, 0.0, decay_hint=scale, spec=spec)
    return np.atleast_1d(res.value).astype(complex), bool(res.converged and flags[0])


def comm_moment(b: complex, theta_c: float, params: NetworkParams, spec: QuadratureSpec | None = None) -> ComplexMoment:
    vals, ok = comm_moments([b], theta_c, params, spec)
    return ComplexMoment(order=complex(b), value=complex(vals[0]), quadrature_converged=ok)
