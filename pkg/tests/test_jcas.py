from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from jcasmeta.analytic import (
    NetworkParams,
    SeriesDivergenceError,
    SirThresholds,
    comm_moments,
    jcas_coverage,
    jcas_meta_distribution,
    jcas_moment,
    marginal_meta_distribution,
    mix_ccdfs,
    sensing_moments,
)

P = NetworkParams()
TH = SirThresholds.from_db(-10.0, -10.0)


@pytest.fixture(scope="module")
def marginal():
    c, _ = comm_moments([1.0, 2.0], TH.theta_c, P)
    s, _ = sensing_moments([1.0, 2.0], TH.theta_s, P)
    return c.real, s.real


def test_no_objects_gives_comm_moment(marginal):
    q = dataclasses.replace(P, lambda_s=0.0)
    assert jcas_moment(1.0, TH, q).value == pytest.approx(marginal[0][0], abs=1e-12)
    assert jcas_moment(0.3 + 2j, TH, q).value == pytest.approx(comm_moments([0.3 + 2j], TH.theta_c, P)[0][0], abs=1e-12)


def test_first_moment_is_weighted_mean(marginal):
    q = dataclasses.replace(P, lambda_u=3e-3, lambda_s=1e-3)
    c, s = marginal
    expect = (3 * c[0] + s[0]) / 4
    assert jcas_moment(1, TH, q).value == pytest.approx(expect, abs=1e-12)
    assert jcas_coverage(TH, q) == pytest.approx(expect, abs=1e-12)


def test_second_moment_binomial(marginal):
    c, s = marginal
    m = jcas_moment(2, TH, P)
    assert m.value == pytest.approx((c[1] + 2 * c[0] * s[0] + s[1]) / 4, abs=1e-12)
    assert m.series_terms_used == 3


def test_order_zero():
    assert jcas_moment(0, TH, P).value == pytest.approx(1.0, abs=1e-9)


def test_fractional_order_series_diverges_with_partial_value():
    # terms need communication moments of negative real order, which overflow
    with pytest.raises(SeriesDivergenceError) as exc:
        jcas_moment(0.5, TH, P)
    assert exc.value.terms_used >= 0
    assert np.isfinite(exc.value.partial)


def test_mixing_two_uniforms_gives_triangle():
    g = np.linspace(0.001, 0.999, 999)
    x = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    f = mix_ccdfs(x, 0.5, g, 1 - g, g, 1 - g)
    expect = np.where(x <= 0.5, 1 - 2 * x**2, 2 * (1 - x) ** 2)
    np.testing.assert_allclose(f, expect, atol=2e-4)


def test_mixing_with_point_mass():
    # B = 0.2 surely, A uniform: w A + (1-w) 0.2 > x  <=>  A > (x - 0.16) / 0.2
    g = np.linspace(0.001, 0.999, 999)
    fs = np.where(g < 0.2, 1.0, 0.0)
    x = np.array([0.17, 0.2, 0.3])
    f = mix_ccdfs(x, 0.2, g, 1 - g, g, fs)
    np.testing.assert_allclose(f, 1 - (x - 0.16) / 0.2, atol=2e-3)


def test_no_objects_meta_curve_equals_comm_curve():
    x = np.array([0.2, 0.5, 0.8, 0.95])
    q = dataclasses.replace(P, lambda_s=0.0)
    a = jcas_meta_distribution(TH, q, x)
    b = marginal_meta_distribution("comm", TH, P, x)
    np.testing.assert_allclose(a.f_value, b.f_value, atol=1e-6)
    assert a.family == "jcas"


def test_grid_validation():
    with pytest.raises(ValueError):
        jcas_meta_distribution(TH, P, [0.5, 0.2])
    with pytest.raises(ValueError):
        jcas_meta_distribution(TH, P, [0.0, 0.5])
