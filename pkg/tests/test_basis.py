import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecocycle.basis import (
    Basis,
    DensitySection,
    GridFunction,
    differentiate,
    grid,
    holder_seminorm,
    integrate,
    interpolate,
    pair_distances,
)
from conecocycle.errors import ConeViolationError, DomainError, ResolutionError


def sin2pi(x):
    return np.sin(2 * np.pi * x)


@pytest.mark.parametrize("basis, n", [("fourier", 16), ("chebyshev", 9), ("chebyshev", 33)])
@pytest.mark.parametrize("x", [0.0, 0.123, 0.5, 1.0])
def test_interpolate_constant(basis, n, x):
    f = GridFunction.constant(1.0, basis, n)
    assert interpolate(f, x) == pytest.approx(1.0, abs=1e-15)


def test_interpolate_exact_representations():
    f = GridFunction.from_function(sin2pi, "fourier", 16)
    assert abs(interpolate(f, 0.25) - 1.0) <= 1e-13
    g = GridFunction.from_function(lambda x: x**2, "chebyshev", 33)
    assert abs(interpolate(g, 0.3) - 0.09) <= 1e-13


def test_interpolate_rejects_non_finite():
    f = GridFunction.constant(1.0, "chebyshev", 9)
    with pytest.raises(DomainError):
        interpolate(f, float("nan"))


def test_interpolate_at_nodes_returns_values():
    f = GridFunction.from_function(lambda x: np.exp(x), "chebyshev", 17)
    assert np.array_equal(interpolate(f, f.nodes), f.values)


@pytest.mark.parametrize(
    "fn, basis, n, expected, tol",
    [
        (lambda x: np.ones_like(x), "fourier", 16, 1.0, 1e-15),
        (sin2pi, "fourier", 16, 0.0, 1e-14),
        (lambda x: x**2, "chebyshev", 33, 1.0 / 3.0, 1e-13),
        (lambda x: np.exp(x), "chebyshev", 33, math.e - 1.0, 1e-13),
    ],
)
def test_integrate(fn, basis, n, expected, tol):
    assert abs(integrate(GridFunction.from_function(fn, basis, n)) - expected) <= tol


def test_differentiate():
    one = GridFunction.constant(1.0, "chebyshev", 16)
    assert differentiate(one, 1).sup() <= 1e-12
    f = GridFunction.from_function(sin2pi, "fourier", 32)
    df = differentiate(f, 1)
    assert np.max(np.abs(df.values - 2 * np.pi * np.cos(2 * np.pi * f.nodes))) <= 1e-10
    g = GridFunction.from_function(lambda x: x**3, "chebyshev", 33)
    assert np.max(np.abs(differentiate(g, 2).values - 6 * g.nodes)) <= 1e-10


def test_differentiate_order_too_large():
    with pytest.raises(ResolutionError):
        differentiate(GridFunction.constant(1.0, "chebyshev", 8), 8)


def test_holder_seminorm_examples():
    one = GridFunction.constant(1.0, "fourier", 16)
    assert holder_seminorm(one, 0, 0.5) == 0.0
    assert holder_seminorm(one, 1, 0.5) <= 1e-12
    f = GridFunction.from_function(lambda x: x, "chebyshev", 33)
    assert abs(holder_seminorm(f, 0, 1.0, 0.25) - 1.0) <= 1e-12


def _dense_scan(fn, delta, m=10_001):
    x = np.linspace(0.0, 1.0, m)
    v = fn(x)
    best, h = 0.0, x[1] - x[0]
    for j in range(1, int(delta / h) + 1):
        best = max(best, float(np.max(np.abs(v[j:] - v[:-j]))) / (j * h))
    return best


@pytest.mark.parametrize("basis, n", [("fourier", 64), ("chebyshev", 65)])
def test_holder_seminorm_against_dense_scan(basis, n):
    oracle = _dense_scan(sin2pi, 0.1)
    assert oracle == pytest.approx(2 * np.pi, rel=1e-6)
    value = holder_seminorm(GridFunction.from_function(sin2pi, basis, n), 0, 1.0, 0.1)
    lower = 2 * np.pi * np.sin(0.1 * np.pi) / (0.1 * np.pi) * 0.9
    # node scan is a lower bound of the dense one
    assert lower <= value <= oracle + 1e-9


def test_holder_seminorm_no_pairs():
    with pytest.raises(DomainError):
        holder_seminorm(GridFunction.constant(1.0, "chebyshev", 8), 0, 1.0, 1e-6)


def test_gauss_pair_distance_is_log_ratio():
    g = grid("chebyshev", 9)
    d = pair_distances(g, "gauss")
    x = g.nodes
    assert np.allclose(d, np.abs(np.log1p(x)[:, None] - np.log1p(x)[None, :]), atol=1e-15)
    assert np.all(np.diag(d) == 0) and np.allclose(d, d.T)


def test_density_section_validation():
    ok = GridFunction.constant(1.0, "chebyshev", 9)
    DensitySection({0: ok}, 10)
    with pytest.raises(ConeViolationError):
        DensitySection({0: ok * 2.0}, 10)
    with pytest.raises(ConeViolationError):
        DensitySection({0: GridFunction.from_function(lambda x: 2 * x, "chebyshev", 9)}, 10)


@pytest.mark.parametrize("basis", list(Basis))
def test_quadrature_weights_sum_to_one(basis):
    assert grid(basis, 24).weights.sum() == pytest.approx(1.0, abs=1e-14)


coeffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=6)


@settings(max_examples=40, deadline=None)
@given(coeffs, st.floats(0.0, 1.0))
def test_polynomials_interpolated_exactly(c, x):
    f = GridFunction.from_function(lambda t: np.polynomial.polynomial.polyval(t, c), "chebyshev", 17)
    assert interpolate(f, x) == pytest.approx(np.polynomial.polynomial.polyval(x, c), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(coeffs, coeffs, st.floats(-3, 3))
def test_integrate_is_linear(c1, c2, s):
    f = GridFunction.from_function(lambda t: np.polynomial.polynomial.polyval(t, c1), "chebyshev", 17)
    g = GridFunction.from_function(lambda t: np.polynomial.polynomial.polyval(t, c2), "chebyshev", 17)
    assert integrate(f + g * s) == pytest.approx(integrate(f) + s * integrate(g), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.floats(0, 2 * np.pi))
def test_fourier_derivative_of_harmonics(k, phase):
    f = GridFunction.from_function(lambda x: np.cos(2 * np.pi * k * x + phase), "fourier", 32)
    expected = -2 * np.pi * k * np.sin(2 * np.pi * k * f.nodes + phase)
    assert np.max(np.abs(differentiate(f).values - expected)) <= 1e-9 * k
