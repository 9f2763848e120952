import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecocycle.basis import GridFunction, integrate
from conecocycle.errors import ConeViolationError, ValidationError
from conecocycle.maps import PolyPerturbation, TrigPerturbation, gauss_family, middle_third, torus_family
from conecocycle.transfer import (
    TransferOperator,
    apply,
    apply_t_derivative,
    apply_u_derivative,
    normalization,
    normalized_apply,
    power_iterate,
)

SINE = TrigPerturbation.sine(1.0 / (4 * np.pi))
BOWEN_T = math.log(2) / math.log(3)


def doubling(n=32):
    return TransferOperator(torus_family(2), "fourier", n)


def test_doubling_preserves_lebesgue():
    L = doubling()
    assert np.allclose(apply(L, GridFunction.constant(1.0, "fourier", 32)).values, 1.0, atol=1e-14)


def test_doubling_annihilates_cosine():
    L = doubling()
    out = apply(L, GridFunction.from_function(lambda x: np.cos(2 * np.pi * x), "fourier", 32))
    assert out.sup() <= 1e-14


def test_doubling_halves_frequency():
    L = doubling()
    out = apply(L, GridFunction.from_function(lambda x: np.cos(4 * np.pi * x), "fourier", 32))
    assert np.max(np.abs(out.values - np.cos(2 * np.pi * out.nodes))) <= 1e-13


@pytest.mark.parametrize("t, expected", [(1.0, 2 / 3), (BOWEN_T, 1.0)])
def test_middle_third_normalization(t, expected):
    L = TransferOperator(middle_third(t), "chebyshev", 16)
    one = GridFunction.constant(1.0, "chebyshev", 16)
    assert np.allclose(apply(L, one).values, expected, atol=1e-14)
    assert normalization(L, one) == pytest.approx(expected, abs=1e-14)


def test_normalized_apply_fixed_point():
    f, lam = normalized_apply(doubling(), GridFunction.constant(1.0, "fourier", 32))
    assert lam == pytest.approx(1.0, abs=1e-14) and np.allclose(f.values, 1.0)


def test_normalization_rejects_non_positive():
    zero_mean = GridFunction.from_function(lambda x: np.cos(4 * np.pi * x), "fourier", 32)
    with pytest.raises(ConeViolationError):
        normalized_apply(doubling(), zero_mean)


def test_gauss_power_iteration():
    L = TransferOperator(gauss_family(), "chebyshev", 64)
    f = GridFunction.constant(1.0, "chebyshev", 64)
    for _ in range(40):
        f, _ = normalized_apply(L, f)
    exact = 1.0 / ((1.0 + f.nodes) * math.log(2))
    assert np.max(np.abs(f.values - exact)) <= 1e-6
    g, _ = power_iterate(L, 200)
    assert np.max(np.abs(g.values - f.values)) <= 1e-6


def test_fourier_rejected_for_interval_families():
    with pytest.raises(ValidationError):
        TransferOperator(gauss_family(), "fourier", 32)


def test_u_derivative_zero_without_parameter():
    assert apply_u_derivative(doubling(), GridFunction.constant(1.0, "fourier", 32)).sup() == 0.0


@pytest.mark.parametrize("u", [0.0, 0.4])
def test_u_derivative_matches_finite_difference(u):
    n = 32
    phi = GridFunction.from_function(lambda x: 1 + 0.3 * np.sin(2 * np.pi * x), "fourier", n)
    sys_ = torus_family(2, SINE, 0.3, u)
    d = apply_u_derivative(TransferOperator(sys_, "fourier", n), phi)
    h = 1e-5
    fd = (apply(TransferOperator(sys_.with_u(u + h), "fourier", n), phi).values
          - apply(TransferOperator(sys_.with_u(u - h), "fourier", n), phi).values) / (2 * h)
    assert np.max(np.abs(d.values - fd)) <= 1e-8


def test_u_derivative_hand_formula_at_zero():
    # phi = 1 at u = 0: sum_i e^{g_i} d_u g_i with d_u g_i = -cos(2 pi psi_i)/4
    L = TransferOperator(torus_family(2, SINE, 0.3, 0.0), "fourier", 32)
    y = L.grid.nodes
    expected = sum(0.5 * -np.cos(2 * np.pi * (y + i) / 2) / 4 for i in range(2))
    out = apply_u_derivative(L, GridFunction.constant(1.0, "fourier", 32))
    assert np.max(np.abs(out.values - expected)) <= 1e-13


def test_gauss_u_derivative_matches_finite_difference():
    kappa = PolyPerturbation(((0, 1, 1.0), (1, 1, 0.25), (1, 2, -0.25)))
    s = gauss_family(kappa, 0.8, u=0.5)
    n = 24
    phi = GridFunction.from_function(lambda x: 1 / (1 + x), "chebyshev", n)
    d = apply_u_derivative(TransferOperator(s, "chebyshev", n), phi)
    h = 1e-5
    fd = (apply(TransferOperator(s.with_u(0.5 + h), "chebyshev", n), phi).values
          - apply(TransferOperator(s.with_u(0.5 - h), "chebyshev", n), phi).values) / (2 * h)
    assert np.max(np.abs(d.values - fd)) <= 1e-7


def test_t_derivative_of_middle_third():
    L = TransferOperator(middle_third(0.5), "chebyshev", 16)
    out = apply_t_derivative(L, GridFunction.constant(1.0, "chebyshev", 16))
    assert np.allclose(out.values, -2 * 3.0**-0.5 * math.log(3))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(-0.5, 0.5))
def test_natural_weight_preserves_integral(c, u):
    # int L phi = int phi for the a.c.i.m. weight
    n = 32
    L = TransferOperator(torus_family(2, SINE, 0.3, u), "fourier", n)
    phi = GridFunction.from_function(
        lambda x: 2 + c[0] * np.cos(2 * np.pi * x) + c[1] * np.sin(4 * np.pi * x) + c[2] * np.cos(6 * np.pi * x), "fourier", n)
    assert integrate(apply(L, phi)) == pytest.approx(integrate(phi), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_positivity_preserved(a, b):
    L = TransferOperator(gauss_family(i_max=64), "chebyshev", 16)
    phi = GridFunction.from_function(lambda x: a + b * x, "chebyshev", 16)
    assert np.min(apply(L, phi).values) > 0
