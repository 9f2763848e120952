import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecocycle.errors import ValidationError
from conecocycle.maps import (
    ACIM,
    AffineBranch,
    PolyPerturbation,
    TrigPerturbation,
    Weight,
    auto_i_max,
    cookie_cutter,
    gauss_family,
    linear_cookie_cutter,
    middle_third,
    torus_family,
    validate_expansion,
    weight_u_derivative,
)

SINE = TrigPerturbation.sine(1.0 / (4 * np.pi))
Y = np.linspace(0.0, 1.0, 11)


def test_doubling_branches():
    d = torus_family(2).branch_data(Y)
    assert np.allclose(d.psi, [(Y + i) / 2 for i in range(2)], atol=1e-15)
    assert np.allclose(np.abs(d.dy), 0.5)


def test_perturbation_vanishes_at_zero():
    a = torus_family(2, SINE, 0.3, u=0.0).branch_data(Y)
    b = torus_family(2).branch_data(Y)
    assert np.allclose(a.psi, b.psi, atol=1e-15) and np.allclose(a.dy, b.dy, atol=1e-15)


def test_tripling_weights_sum_to_one():
    assert np.allclose(np.exp(torus_family(3).log_weights(Y)).sum(axis=0), 1.0, atol=1e-15)


@pytest.mark.parametrize("u", [-0.5, 0.0, 0.3, 0.5])
def test_torus_branches_invert_forward_map(u):
    s = torus_family(2, SINE, 0.3, u)
    d = s.branch_data(Y)
    for i in range(2):
        assert np.max(np.abs(np.mod(s.forward(d.psi[i]) - Y + 0.5, 1.0) - 0.5)) <= 1e-13


def test_torus_expansion_violation():
    with pytest.raises(ValidationError):
        torus_family(2, SINE, 0.25, u=4.0)
    with pytest.raises(ValidationError):
        torus_family(2, theta1=1.0)
    with pytest.raises(ValidationError):
        torus_family(1)


def test_gauss_branches():
    d = gauss_family(i_max=50).branch_data(Y)
    i = np.arange(1, 51)[:, None]
    assert np.allclose(d.psi, 1.0 / (i + Y), rtol=1e-14)
    assert np.allclose(d.dy, -1.0 / (i + Y) ** 2, rtol=1e-13)


def test_gauss_theta_bound():
    with pytest.raises(ValidationError):
        gauss_family(theta=0.5)


def test_gauss_tail_bounds():
    g = gauss_family(i_max=1000, tail_correction=False)
    assert g.tail_mass_bound <= 1e-3
    # integral comparison oracle for sum_{i>I} 1/i^2
    exact_tail = math.pi**2 / 6 - sum(1.0 / i**2 for i in range(1, 1001))
    assert exact_tail <= g.tail_mass_bound
    assert auto_i_max(1.0, 1e-8) == 256
    assert gauss_family(tail_tol=1e-8).tail_error_estimate <= 1e-8


def test_gauss_perturbed_inversion():
    kappa = PolyPerturbation(((0, 1, 1.0), (1, 1, 0.25), (1, 2, -0.25)))
    s = gauss_family(kappa, theta=0.875, i_max=40, u=0.5)
    d = s.branch_data(Y)
    x = d.psi
    k = kappa(0.5, x)
    assert np.allclose(1.0 / k, np.arange(1, 41)[:, None] + Y, rtol=1e-12)


def test_cookie_cutter_examples():
    assert middle_third().lam == pytest.approx(3.0)
    assert linear_cookie_cutter([3.0, 4.0]).lam == pytest.approx(3.0)
    halves = [AffineBranch((2.0, 0.0), (0.0, 0.0), "left"), AffineBranch((2.0, 0.0), (1.0, 0.0), "right")]
    with pytest.raises(ValidationError):
        cookie_cutter(halves)
    assert cookie_cutter(halves, allow_touching=True).full_branch


def test_cookie_cutter_overlap_and_expansion():
    with pytest.raises(ValidationError):
        cookie_cutter([AffineBranch((1.5, 0.0), (0.0, 0.0), "left"), AffineBranch((1.5, 0.0), (1.0, 0.0), "right")])
    with pytest.raises(ValidationError):
        cookie_cutter([AffineBranch((1.0, 0.0), (0.0, 0.0), "left")])


def test_weight_u_derivative_hand_formula():
    s = torus_family(2, SINE, 0.3, 0.0)
    d = s.branch_data(Y)
    for i in range(2):
        assert np.allclose(weight_u_derivative(s, i, Y), -np.cos(2 * np.pi * d.psi[i]) / 4, atol=1e-14)
    assert np.all(weight_u_derivative(torus_family(2), 0, Y) == 0.0)


@pytest.mark.parametrize(
    "system",
    [torus_family(2, SINE, 0.3, 0.2), gauss_family(PolyPerturbation(((0, 1, 1.0), (1, 1, 0.25), (1, 2, -0.25))), 0.875, 30, u=0.3)],
    ids=["torus", "gauss"],
)
def test_branch_u_derivatives_match_finite_differences(system):
    h = 1e-6
    d = system.branch_data(Y)
    p, m = system.with_u(system.u + h).branch_data(Y), system.with_u(system.u - h).branch_data(Y)
    assert np.max(np.abs(d.du - (p.psi - m.psi) / (2 * h))) <= 1e-8
    assert np.max(np.abs(d.dlogjac_du - (p.logjac - m.logjac) / (2 * h))) <= 1e-7


def test_validate_expansion_examples():
    assert validate_expansion(torus_family(2)).k_sigma == 1.0
    mt = validate_expansion(middle_third(1.0))
    assert mt.sigma_min == pytest.approx(2 / 3) and mt.sigma_max == pytest.approx(2 / 3)
    g = gauss_family(i_max=1000, tail_correction=False)
    r = validate_expansion(g, y_values=[0.0])
    assert math.pi**2 / 6 - g.tail_mass_bound <= r.sigma_max <= math.pi**2 / 6
    assert r.ok


def test_weight_kinds():
    assert ACIM.exponent == 1.0
    assert Weight.geometric(0.4).exponent == 0.4
    with pytest.raises(ValidationError):
        Weight.geometric(-1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.0, 1.0))
def test_torus_branch_derivative_is_inverse_of_forward_slope(u, y):
    s = torus_family(2, SINE, 0.3, u)
    d = s.branch_data(np.array([y]))
    x = d.psi[:, 0]
    slope = 2 + SINE.dx(u, x)
    assert np.allclose(d.dy[:, 0] * slope, 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.1, 2.0))
def test_geometric_weight_is_power_of_jacobian(y, t):
    s = middle_third(t)
    assert np.allclose(np.exp(s.log_weights(np.array([y]))), 3.0**-t)
