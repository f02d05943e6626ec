"""Joint (user + sensed-object) coverage: moment mixing and meta distributions.

The joint conditional coverage is ``w_u P_c + w_s P_s`` with weights
proportional to the user and object densities.  Its moments follow from a
binomial expansion over the two families.  For non-integer orders that
expansion needs communication moments of negative real order, which blow up
under the model's phantom LoS interferers, so the meta distribution is also
available by mixing the two marginal CCDFs directly (treating P_c and P_s as
independent, as the expansion does).
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np

from ..quadrature import DEFAULT_SPEC, QuadratureError, QuadratureSpec
from .communication import comm_moments
from .inversion import INVERSION_SPEC, MomentCache, invert_ccdf
from .params import ComplexMoment, MetaCurve, NetworkParams, SeriesDivergenceError, SirThresholds
from .sensing import sensing_moments

# moment accuracy used inside inversions; Kronrod error estimates run two to
# three orders above the true error, which sits near 1e-8 at this setting
META_MOMENT_SPEC = QuadratureSpec(rel_tol=1e-3, abs_tol=1e-6)

FAMILIES = ("comm", "sensing", "jcas")


def family_moments(family: str, orders, th: SirThresholds, params: NetworkParams, spec: QuadratureSpec | None = None):
    """Vectorized moments ``(values, converged)`` of one marginal family."""
    if family == "comm":
        return comm_moments(orders, th.theta_c, params, spec)
    if family == "sensing":
        return sensing_moments(orders, th.theta_s, params, spec)
    raise ValueError(f"unknown marginal family {family!r}")


@functools.lru_cache(maxsize=128)
def _imaginary_moments(family: str, theta: float, params: NetworkParams, spec: QuadratureSpec) -> MomentCache:
    th = SirThresholds(theta, theta)
    return MomentCache(lambda w: family_moments(family, 1j * np.asarray(w), th, params, spec))


def imaginary_moment_cache(family: str, th: SirThresholds, params: NetworkParams, spec: QuadratureSpec | None = None) -> MomentCache:
    """Shared memo of ``w -> M(jw)`` for a marginal family at its threshold."""
    theta = th.theta_c if family == "comm" else th.theta_s
    # marginal moments do not depend on the user and object densities
    key = dataclasses.replace(params, lambda_u=1.0, lambda_s=1.0)
    return _imaginary_moments(family, float(theta), key, spec or META_MOMENT_SPEC)


def _binomials(b: complex, count: int) -> np.ndarray:
    c = np.empty(count, dtype=complex)
    c[0] = 1.0
    for m in range(count - 1):
        c[m + 1] = c[m] * (b - m) / (m + 1)
    return c


def jcas_moment(
    b: complex,
    th: SirThresholds,
    params: NetworkParams,
    spec: QuadratureSpec | None = None,
    max_terms: int = 64,
) -> ComplexMoment:
    """Moment of the joint coverage by binomial mixing of the two families.

    Nonnegative integer orders give a finite exact sum.  Other orders are
    summed until three consecutive terms fall below ``rel_tol`` of the
    partial sum; overflow or growing terms raise :class:`SeriesDivergenceError`.
    """
    spec = spec or DEFAULT_SPEC
    b = complex(b)
    if b.real < 0:
        raise ValueError("joint moments need Re(b) >= 0")
    w_u, w_s = params.weights
    if params.lambda_s == 0:
        v, ok = comm_moments([b], th.theta_c, params, spec)
        return ComplexMoment(b, complex(v[0]), 1, ok)
    if params.lambda_u == 0:
        v, ok = sensing_moments([b], th.theta_s, params, spec)
        return ComplexMoment(b, complex(v[0]), 1, ok)

    integer = b.imag == 0 and b.real == round(b.real)
    if integer:
        n = int(round(b.real))
        m = np.arange(n + 1)
        coef = _binomials(b, n + 1)
        mc, ok_c = comm_moments(b - m, th.theta_c, params, spec)
        ms, ok_s = sensing_moments(m.astype(complex), th.theta_s, params, spec)
        terms = coef * w_u ** (n - m) * w_s**m * mc * ms
        return ComplexMoment(b, complex(terms.sum()), n + 1, ok_c and ok_s)

    coef = _binomials(b, max_terms)
    partial = 0j
    small = 0
    prev = math.inf
    ok = True
    block = 4
    for start in range(0, max_terms, block):
        m = np.arange(start, min(max_terms, start + block))
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                mc, ok_c = comm_moments(b - m, th.theta_c, params, spec)
            ms, ok_s = sensing_moments(m.astype(complex), th.theta_s, params, spec)
        except QuadratureError as exc:
            raise SeriesDivergenceError(
                f"a moment of order {b - m[0]} .. {b - m[-1]} is not finite ({exc})", partial, int(start)
            ) from exc
        ok = ok and ok_c and ok_s
        log_w = (b - m) * math.log(w_u) + m * math.log(w_s)
        terms = coef[m] * np.exp(log_w) * mc * ms
        for k, t in zip(m, terms):
            if not np.isfinite(t):
                raise SeriesDivergenceError(f"term {k} is not finite", partial, int(k))
            partial += t
            mag = abs(t)
            if mag > prev and k > 2:
                raise SeriesDivergenceError(f"terms stopped decreasing at m={k}", partial, int(k) + 1)
            prev = mag
            small = small + 1 if mag < spec.rel_tol * abs(partial) else 0
            if small >= 3:
                return ComplexMoment(b, complex(partial), int(k) + 1, ok)
    raise SeriesDivergenceError(f"series not settled after {max_terms} terms", partial, max_terms)


def jcas_coverage(th: SirThresholds, params: NetworkParams, spec: QuadratureSpec | None = None) -> float:
    """Joint coverage: density-weighted mean of the two first moments."""
    spec = spec or DEFAULT_SPEC
    w_u, w_s = params.weights
    m1c = float(comm_moments([1.0], th.theta_c, params, spec)[0][0].real) if w_u > 0 else 0.0
    m1s = float(sensing_moments([1.0], th.theta_s, params, spec)[0][0].real) if w_s > 0 else 0.0
    return w_u * m1c + w_s * m1s


def _curve_from(res, family, th, label) -> MetaCurve:
    errors = [None if ok else f"inversion not settled (tail swing {a:.2e})" for ok, a in zip(res.converged, res.tail_amplitude)]
    return MetaCurve(
        family=family,
        theta_c_db=th.theta_c_db if family in ("comm", "jcas") else None,
        theta_s_db=th.theta_s_db if family in ("sensing", "jcas") else None,
        x=np.asarray(res.x, dtype=float),
        f_value=np.asarray(res.ccdf, dtype=float),
        method=label,
        errors=errors,
        omega_max=float(np.max(res.omega_max)),
    )


def _check_grid(x_grid) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if x.size == 0 or np.any((x <= 0) | (x >= 1)):
        raise ValueError("x_grid must lie strictly inside (0, 1)")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    return x


def marginal_meta_distribution(
    family: str,
    th: SirThresholds,
    params: NetworkParams,
    x_grid,
    spec: QuadratureSpec | None = None,
    inv_spec: QuadratureSpec | None = None,
) -> MetaCurve:
    """Meta distribution of the user ('comm') or sensed-object ('sensing') coverage."""
    x = _check_grid(x_grid)
    cache = imaginary_moment_cache(family, th, params, spec)
    res = invert_ccdf(x, cache, inv_spec or INVERSION_SPEC, extrapolate_from=64.0)
    curve = _curve_from(res, family, th, "gil-pelaez")
    if not cache.converged:
        curve.errors = [e or "moment quadrature flagged non-convergence" for e in curve.errors]
    return curve


# reliabilities on which the marginal CCDFs are tabulated before mixing
def _mixing_grid() -> np.ndarray:
    inner = np.linspace(0.001, 0.999, 999)
    edges = np.geomspace(1e-5, 1e-3, 9)
    return np.unique(np.round(np.concatenate([edges, inner, 1.0 - edges]), 12))


def mix_ccdfs(x, w_u: float, fc_x, fc_f, fs_x, fs_f) -> np.ndarray:
    """CCDF of ``w_u A + w_s B`` for independent A, B in [0, 1] given their CCDFs on grids.

    B's mass is spread uniformly inside each grid cell; A's CCDF is linearly
    interpolated.  Each cell's contribution is a Simpson average.
    """
    w_s = 1.0 - w_u
    gx = np.concatenate([[0.0], fs_x, [1.0]])
    gf = np.concatenate([[1.0], np.minimum.accumulate(np.clip(fs_f, 0, 1)), [0.0]])
    mass = -np.diff(gf)
    ax = np.concatenate([[0.0], fc_x, [1.0]])
    af = np.concatenate([[1.0], np.minimum.accumulate(np.clip(fc_f, 0, 1)), [0.0]])

    def fa(z):
        return np.where(z <= 0.0, 1.0, np.where(z >= 1.0, 0.0, np.interp(z, ax, af)))

    x = np.asarray(x, dtype=float)
    q0, q1 = gx[:-1], gx[1:]
    qm = 0.5 * (q0 + q1)
    out = np.empty(x.size)
    for i, xv in enumerate(x):
        avg = (fa((xv - w_s * q0) / w_u) + 4.0 * fa((xv - w_s * qm) / w_u) + fa((xv - w_s * q1) / w_u)) / 6.0
        out[i] = float(np.dot(mass, avg))
    return out


def _series_curve(th, params, x, spec, inv_spec) -> MetaCurve:
    spec = spec or META_MOMENT_SPEC

    def fn(w):
        return np.array([jcas_moment(1j * v, th, params, spec).value for v in np.atleast_1d(w)])

    res = invert_ccdf(x, MomentCache(fn), inv_spec or INVERSION_SPEC, extrapolate_from=64.0)
    return _curve_from(res, "jcas", th, "series")


def jcas_meta_distribution(
    th: SirThresholds,
    params: NetworkParams,
    x_grid,
    spec: QuadratureSpec | None = None,
    inv_spec: QuadratureSpec | None = None,
    method: str = "auto",
) -> MetaCurve:
    """Meta distribution of the joint coverage.

    ``method`` is 'series' (binomial moment mixing, then inversion),
    'mixture' (mix the two inverted marginal CCDFs) or 'auto' (series when
    its first imaginary-order moment converges, otherwise mixture).  A zero
    density collapses to the other family's curve.
    """
    if method not in ("auto", "series", "mixture"):
        raise ValueError("method must be 'auto', 'series' or 'mixture'")
    x = _check_grid(x_grid)
    if params.lambda_s == 0 or params.lambda_u == 0:
        fam = "comm" if params.lambda_s == 0 else "sensing"
        curve = marginal_meta_distribution(fam, th, params, x, spec, inv_spec)
        curve.family = "jcas"
        curve.theta_c_db, curve.theta_s_db = th.theta_c_db, th.theta_s_db
        curve.method = f"{fam}-only"
        return curve
    if method in ("auto", "series"):
        try:
            if method == "auto":
                jcas_moment(1j, th, params, spec or META_MOMENT_SPEC)
            return _series_curve(th, params, x, spec, inv_spec)
        except SeriesDivergenceError as exc:
            if method == "series":
                nan = np.full(x.size, np.nan)
                return MetaCurve("jcas", th.theta_c_db, th.theta_s_db, x, nan, "series",
                                 [f"series diverged: {exc}"] * x.size)
    grid = _mixing_grid()
    cc = marginal_meta_distribution("comm", th, params, grid, spec, inv_spec)
    cs = marginal_meta_distribution("sensing", th, params, grid, spec, inv_spec)
    w_u, _ = params.weights
    f = mix_ccdfs(x, w_u, cc.x, cc.f_value, cs.x, cs.f_value)
    f = np.minimum.accumulate(np.clip(f, 0.0, 1.0))
    unsettled = sum(e is not None for e in cc.errors) + sum(e is not None for e in cs.errors)
    err = None if unsettled == 0 else f"{unsettled} marginal reliabilities not settled"
    return MetaCurve("jcas", th.theta_c_db, th.theta_s_db, x, f, "mixture", [err] * x.size,
                     max(cc.omega_max, cs.omega_max))


def meta_distribution(family: str, th: SirThresholds, params: NetworkParams, x_grid, spec=None, inv_spec=None, **kw) -> MetaCurve:
    if family == "jcas":
        return jcas_meta_distribution(th, params, x_grid, spec, inv_spec, **kw)
    return marginal_meta_distribution(family, th, params, x_grid, spec, inv_spec)
