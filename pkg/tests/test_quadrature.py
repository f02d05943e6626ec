from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcasmeta.quadrature import (
    DivergenceError,
    NonFiniteIntegrandError,
    QuadratureSpec,
    integrate_complex,
    integrate_finite,
    integrate_semi_infinite,
)


def test_finite_examples():
    assert integrate_finite(lambda x: x, 0, 1).value == pytest.approx(0.5, abs=1e-14)
    assert integrate_finite(np.sin, 0, math.pi).value == pytest.approx(2.0, abs=1e-12)


def test_arcsine_endpoint_singularity():
    res = integrate_finite(lambda u: 1 / np.sqrt(1 - u * u), 0, 1, endpoint_singular=True)
    assert res.value == pytest.approx(math.pi / 2, abs=1e-8)
    assert res.converged


def test_semi_infinite_examples():
    assert integrate_semi_infinite(lambda x: np.exp(-x), 0).value == pytest.approx(1.0, rel=1e-9)
    assert integrate_semi_infinite(lambda x: x * np.exp(-x * x), 0).value == pytest.approx(0.5, rel=1e-9)
    lam, beta = 1e-4, 1 / 140
    res = integrate_semi_infinite(lambda r: 2 * math.pi * lam * r * np.exp(-beta * r), 0, decay_hint=30 / beta)
    assert res.value == pytest.approx(2 * math.pi * lam / beta**2, rel=1e-9)
    assert res.value == pytest.approx(12.3150, abs=1e-4)


def test_complex_examples():
    v = integrate_complex(lambda x: np.exp(1j * x), 0, 1).value
    assert v == pytest.approx(complex(math.sin(1), 1 - math.cos(1)), abs=1e-12)
    assert integrate_complex(lambda x: np.ones_like(x), 0, 1).value == pytest.approx(1 + 0j)
    assert integrate_complex(lambda x: np.exp(1j * x), 0, math.pi).value == pytest.approx(2j, abs=1e-12)


def test_nan_names_abscissa():
    with pytest.raises(NonFiniteIntegrandError) as exc:
        integrate_finite(lambda x: np.where(x > 0.5, np.nan, x), 0, 1)
    assert exc.value.abscissa > 0.5


def test_divergent_tail_detected():
    with pytest.raises(DivergenceError):
        integrate_semi_infinite(lambda x: 1.0 / (1.0 + x), 0.0)


def test_converged_implies_error_bound():
    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
    res = integrate_finite(lambda x: np.exp(-x) * np.cos(5 * x), 0, 3, spec)
    assert res.converged
    assert res.error_estimate <= max(spec.rel_tol * abs(res.value), spec.abs_tol)


def test_budget_exhaustion_flags_non_convergence():
    res = integrate_finite(lambda x: np.sin(1 / x), 1e-6, 1, QuadratureSpec(max_subdivisions=3))
    assert not res.converged


def test_vector_integrand():
    res = integrate_finite(lambda x: np.stack([x, x * x], axis=-1), 0, 1)
    np.testing.assert_allclose(res.value, [0.5, 1 / 3], rtol=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=0)


def test_deterministic():
    f = lambda x: np.exp(-x) / (1 + x * x)  # noqa: E731
    a = integrate_semi_infinite(f, 0.0)
    b = integrate_semi_infinite(f, 0.0)
    assert a.value == b.value and a.error_estimate == b.error_estimate


coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(coef, coef, st.floats(0.1, 5), st.floats(0.1, 5))
def test_linearity(a, b, w1, w2):
    f = lambda x: np.cos(w1 * x)  # noqa: E731
    g = lambda x: np.exp(-w2 * x)  # noqa: E731
    lhs = integrate_finite(lambda x: a * f(x) + b * g(x), 0, 2).value
    rhs = a * integrate_finite(f, 0, 2).value + b * integrate_finite(g, 0, 2).value
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.2, 4))
def test_interval_additivity(c, w):
    f = lambda x: np.exp(-w * x) * np.sin(3 * x) + 1.0  # noqa: E731
    whole = integrate_finite(f, 0, 1).value
    parts = integrate_finite(f, 0, c).value + integrate_finite(f, c, 1).value
    assert whole == pytest.approx(parts, rel=1e-10, abs=1e-12)
