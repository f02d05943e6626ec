"""Sensing moments of a blockage-free, LoS-only network by series expansion.

Interferers form a PPP of density ``lambda_b`` with a hole of angular size
``2 arccos(r / 2 r0)`` inside ``r <= 2 r0``; the serving distance is
Rayleigh.  With ``v = (2 r0 / r)^alpha``, ``delta = 2 / alpha`` and
``a = theta (r0 / 2)^alpha`` the exponent splits into

    4 pi lam r0^2 delta int_0^1 k(a v) v^(-delta-1) dv
  + 2 pi lam r0^2 delta int_1^inf k(a v) v^(-delta-1) dv
  + 4 lam r0^2 delta sum_n c_n int_1^inf k(a v) v^(-delta(n+3/2)-1) dv,

where ``k(y) = 1 - (1+y)^(-b)`` and ``c_n`` are the arcsin Taylor
coefficients.  The arcsin series is truncated at ``n_series`` terms.
"""

from __future__ import annotations

import math

import numpy as np

from ..quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_finite
from ._kernel import as_orders, chunk_rows, geometric_points, mean_spacing, sir_kernel
from .params import ComplexMoment, NetworkParams


def arcsin_coefficients(n: int) -> np.ndarray:
    """c_n = Gamma(n + 1/2) / (Gamma(1/2) n! (2n + 1)), n = 0 .. n-1."""
    if n < 1:
        raise ValueError("need at least one series term")
    g = np.empty(n)
    g[0] = 1.0
    k = np.arange(1, n)
    # Gamma(n+1/2) / (Gamma(1/2) n!) = prod (k - 1/2) / k
    g[1:] = np.cumprod((k - 0.5) / k)
    return g / (2.0 * np.arange(n) + 1.0)


def truncation_bound(n_series: int, lambda_b: float) -> float:
    """Bound on |dM| from dropping arcsin terms n >= n_series (|k| <= 2, E[r0^2] = 1/(pi lam))."""
    # sum_{n>=N} c_n / (n + 3/2) <= int_{N-1}^inf x^(-5/2) / (2 sqrt(pi)) dx
    n = max(n_series - 1, 1)
    tail = n**-1.5 / (3.0 * math.sqrt(math.pi))
    return 8.0 * tail / math.pi


def _poly(coef: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    for c in coef[::-1]:
        out = out * w + c
    return out


def los_only_sensing_moments(
    orders,
    theta_s: float,
    params: NetworkParams,
    n_series: int = 2000,
    spec: QuadratureSpec | None = None,
    alpha: float | None = None,
):
    """Vectorized LoS-only moments; returns ``(values, converged)``.

    ``alpha`` defaults to the LoS exponent.  For ``alpha <= 2`` the far-field
    interference diverges: positive-real-part moments are zero and purely
    imaginary ones are undefined.
    """
    spec = spec or DEFAULT_SPEC
    b = as_orders(orders)
    if np.any(b.real < 0):
        raise ValueError("moments need Re(b) >= 0")
    if not theta_s > 0:
        raise ValueError("theta_s must be positive")
    alpha = params.channel.alpha_los if alpha is None else float(alpha)
    lam = params.lambda_b
    delta = 2.0 / alpha
    if delta >= 1.0:
        if np.any((b.real == 0) & (b != 0)):
            raise ValueError("imaginary-order moments are undefined when alpha <= 2 (interference diverges)")
        return np.where(b == 0, 1.0 + 0j, 0j), True
    coef = arcsin_coefficients(n_series)
    p = 1.0 / (1.0 - delta)
    flags = [True]

    def exponent(r0):
        log_a = np.log(theta_s) + alpha * np.log(0.5 * r0)
        n0 = r0.size

        def near(t):
            # v = t^p flattens the v^-delta behaviour at v -> 0
            v_log = p * np.log(t)
            lk = np.logaddexp(0.0, log_a[None, :] + v_log[:, None])
            # dv v^(-delta-1) = p t^(-p) dt because p (1 - delta) = 1
            w = p * np.exp(-p * np.log(t))
            return (sir_kernel(lk, b) * w[:, None, None]).reshape(t.size, -1)

        def far(w):
            # w = v^-delta maps [1, inf) onto (0, 1]
            lk = np.logaddexp(0.0, log_a[None, :] - np.log(w)[:, None] / delta)
            k = sir_kernel(lk, b)
            series = np.sqrt(w) * _poly(coef, w)
            both = np.stack([k, k * series[:, None, None]], axis=1)
            return both.reshape(w.size, -1)

        r_near = integrate_finite(near, 0.0, 1.0, spec=spec)
        r_far = integrate_finite(far, 0.0, 1.0, spec=spec)
        flags[0] = flags[0] and r_near.converged and r_far.converged
        i1 = np.asarray(r_near.value).reshape(n0, b.size)
        fv = np.asarray(r_far.value).reshape(2, n0, b.size) / delta
        r2 = (r0 * r0)[:, None]
        return (4.0 * math.pi * lam * r2 * delta * i1
                + 2.0 * math.pi * lam * r2 * delta * fv[0]
                + 4.0 * lam * r2 * delta * fv[1])

    def outer(r0):
        out = np.empty((r0.size, b.size), dtype=complex)
        for sl in chunk_rows(r0.size, 2 * b.size):
            pdf = 2.0 * math.pi * lam * r0[sl] * np.exp(-math.pi * lam * r0[sl] ** 2)
            out[sl] = pdf[:, None] * np.exp(-exponent(r0[sl]))
        return out

    scale = mean_spacing(lam)
    R = scale * math.sqrt(-math.log(1e-16))
    res = integrate_finite(outer, 0.0, R, spec=spec, points=geometric_points(0.25 * scale, R))
    ok = bool(res.converged and flags[0])
    return np.atleast_1d(res.value).astype(complex), ok


def los_only_sensing_moment(
    b: complex,
    theta_s: float,
    params: NetworkParams,
    n_series: int = 2000,
    spec: QuadratureSpec | None = None,
    series_tol: float = 1e-5,
    alpha: float | None = None,
) -> ComplexMoment:
    """LoS-only sensing moment; flagged unconverged when the series bound exceeds ``series_tol``."""
    vals, ok = los_only_sensing_moments([b], theta_s, params, n_series, spec, alpha)
    ok = ok and truncation_bound(n_series, params.lambda_b) <= series_tol
    return ComplexMoment(order=complex(b), value=complex(vals[0]), series_terms_used=n_series, quadrature_converged=ok)
