from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from jcasmeta.analytic import NetworkParams, comm_association_pdfs, comm_moment, comm_moments, psi_los, psi_nlos
from jcasmeta.propagation import LinkState

from .oracles import comm_moment_direct

P = NetworkParams()
# (10^-1.5)^(1/3.2) * 100^(2/3.2) evaluated by hand: 0.339821 * 17.782794
PSI_L_100 = 6.0430


def test_psi_los_hand_value():
    assert psi_los(100.0, P) == pytest.approx(PSI_L_100, abs=5e-5)
    ch = P.channel
    second = math.exp(math.log(ch.k_nlos / ch.k_los) / ch.alpha_nlos + ch.alpha_los / ch.alpha_nlos * math.log(100.0))
    assert psi_los(100.0, P) == pytest.approx(second, rel=1e-14)


@given(st.floats(1e-2, 1e4))
def test_psi_functions_are_inverse(r):
    assert psi_nlos(psi_los(r, P), P) == pytest.approx(r, rel=1e-12)


@pytest.mark.parametrize("state", list(LinkState))
def test_pdf_vanishes_at_origin(state):
    assert comm_association_pdfs(0.0, state, P) == 0.0


def test_association_mass_is_one():
    pts = [10, 50, 100, 300, 1000]
    kw = dict(limit=500, points=pts, epsabs=1e-13)
    a_l = integrate.quad(lambda r: comm_association_pdfs(r, LinkState.LOS, P), 0, 3000, **kw)[0]
    a_n = integrate.quad(lambda r: comm_association_pdfs(r, LinkState.NLOS, P), 0, 3000, **kw)[0]
    assert a_l + a_n == pytest.approx(1.0, abs=1e-6)
    assert a_l > 0.999


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5000.0), st.sampled_from(list(LinkState)))
def test_pdfs_non_negative(r, state):
    assert comm_association_pdfs(r, state, P) >= 0.0


def test_moment_order_zero_and_small_threshold():
    assert comm_moment(0.0, 1.0, P).value == pytest.approx(1.0, abs=1e-9)
    assert comm_moment(1.0, 1e-12, P).value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("theta", [0.1, 1.0])
def test_moment_matches_direct_quadrature(theta):
    m = comm_moment(1.0, theta, P)
    assert m.quadrature_converged
    assert m.value.real == pytest.approx(comm_moment_direct(1.0, theta, P), abs=1e-8)
    assert abs(m.value.imag) < 1e-12


def test_moment_regression_values():
    vals, ok = comm_moments([1.0, 2.0], 0.1, P)
    assert ok
    np.testing.assert_allclose(vals.real, [0.880314011, 0.782296411], atol=1e-8)


def test_imaginary_moment_inside_unit_disc():
    vals, _ = comm_moments([0.1j, 1j, 10j, 50j], 0.1, P)
    assert np.all(np.abs(vals) <= 1 + 1e-9)
