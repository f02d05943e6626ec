from __future__ import annotations

import math

import numpy as np

# inner integrals run over (#outer nodes x #orders) components at once; cap
# that product to keep the per-panel arrays small
MAX_COMPONENTS = 2048


def sir_kernel(log1p_y: np.ndarray, b: np.ndarray) -> np.ndarray:
    """1 - (1 + y)^(-b) from log1p(y), broadcast to shape (..., len(b))."""
    # bases 1 + y are real and >= 1, so the principal power has no branch issue
    if np.any(log1p_y < 0):
        raise ArithmeticError("kernel base below one")
    return -np.expm1(-log1p_y[..., None] * b)


def log1p_power(log_coef: np.ndarray, alpha: float, log_r: np.ndarray) -> np.ndarray:
    """log1p(exp(log_coef - alpha log r)) without overflowing for small r."""
    return np.logaddexp(0.0, log_coef - alpha * log_r)


def chunk_rows(n_rows: int, n_orders: int):
    step = max(1, MAX_COMPONENTS // max(1, n_orders))
    for i in range(0, n_rows, step):
        yield slice(i, min(n_rows, i + step))


def geometric_points(start: float, stop: float) -> list[float]:
    pts = []
    x = start
    while x < stop:
        pts.append(x)
        x *= 2.0
    return pts


def as_orders(orders) -> np.ndarray:
    b = np.atleast_1d(np.asarray(orders, dtype=complex)).ravel()
    if np.any(~np.isfinite(b)):
        raise ValueError("moment orders must be finite")
    return b


def mean_spacing(lambda_b: float) -> float:
    return 1.0 / math.sqrt(math.pi * lambda_b)
