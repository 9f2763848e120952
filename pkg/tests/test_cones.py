import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conecocycle.basis import GridFunction
from conecocycle.cones import (
    ConeParams,
    InsufficientConstantsError,
    cone_distance,
    cone_membership,
    constraint_matrix,
    contraction_certificate,
    diameter_bound,
    find_invariant_cone,
    hilbert_distance,
    invariance_check,
    random_cone_member,
)
from conecocycle.errors import ConeViolationError, ValidationError
from conecocycle.maps import torus_family
from conecocycle.transfer import TransferOperator


def test_hilbert_distance_examples():
    x = np.array([1.0, 3.0, 0.5])
    assert hilbert_distance(x, x) == 0.0
    assert hilbert_distance(2 * x, x) == pytest.approx(0.0, abs=1e-15)
    assert hilbert_distance(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == pytest.approx(math.log(4))


def test_hilbert_distance_rejects_non_positive():
    with pytest.raises(ConeViolationError):
        hilbert_distance(np.array([1.0, 0.0]), np.array([1.0, 1.0]))


def test_membership_examples():
    cone = ConeParams((10.0, 10.0))
    one = GridFunction.constant(1.0, "fourier", 32)
    r = cone_membership(one, cone)
    assert r.member
    assert r.margins["C1[1]"] == pytest.approx(10.0) and r.margins["C2"] == pytest.approx(10.0)
    wavy = GridFunction.from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x), "fourier", 32)
    # (C1) holds with a_1 = 10 since |f'| <= pi < 10 min f; (C2) needs a_{1,alpha} >= sup|f''| / min f = 2 pi^2
    assert cone_membership(wavy, ConeParams((10.0, 40.0))).member
    assert cone_membership(wavy, cone).margins["C1[1]"] > 0
    assert not cone_membership(GridFunction.from_function(lambda x: np.sin(2 * np.pi * x), "fourier", 32), cone).member


def test_membership_agrees_with_constraint_rows():
    cone = ConeParams((3.0, 5.0))
    rng = np.random.default_rng(0)
    G = constraint_matrix(cone, "fourier", 16)
    for _ in range(20):
        v = 1 + 0.4 * rng.standard_normal(16)
        f = GridFunction("fourier", v)
        assert cone_membership(f, cone).member == bool(np.all(G @ v >= 0))


@pytest.mark.parametrize(
    "kwargs, expected",
    [
        (dict(K=1.0, rho=1.0), 2 * math.log(3)),
        (dict(sigma=0.5, R=1.0), 2 * math.log(3)),
        (dict(sigma=1e-12, R=1.0), 0.0),
    ],
)
def test_diameter_bound_examples(kwargs, expected):
    assert diameter_bound(**kwargs) == pytest.approx(expected, abs=1e-10)


def test_diameter_bound_needs_constants():
    with pytest.raises(InsufficientConstantsError):
        diameter_bound(K=1.0, rho=0.0)


def test_cone_params_validation():
    with pytest.raises(ValidationError):
        ConeParams((1.0,), k=1)
    with pytest.raises(ValidationError):
        ConeParams((1.0, -1.0))
    c = ConeParams((2.0, 3.0))
    assert c.R_value == pytest.approx(math.e**2)
    assert c.K_value == pytest.approx(3 * math.e**2)
    assert c.rho_value < 2 / 3


def test_identity_is_not_strict():
    c = contraction_certificate(np.eye(3), None, 50, 0)
    assert c.max_ratio == pytest.approx(1.0) and not c.strict


def _plane_scan():
    A = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3
    s = np.geomspace(1e-3, 1e3, 301)
    pts = np.stack([np.ones_like(s), s], axis=1)
    best = 0.0
    for i in range(len(s)):
        for j in range(i):
            d0 = hilbert_distance(pts[i], pts[j])
            best = max(best, hilbert_distance(A @ pts[i], A @ pts[j]) / d0)
    return A, best


def test_positive_matrix_contraction():
    A, scan = _plane_scan()
    bound = math.tanh(math.log(4) / 4)
    assert scan <= bound + 1e-12
    c = contraction_certificate(A, None, 200, 1)
    assert c.max_ratio <= scan + 1e-9 and c.strict


def test_doubling_contracts_on_invariant_cone():
    L = TransferOperator(torus_family(2), "fourier", 32)
    cone = find_invariant_cone([L], seed=1)
    c = contraction_certificate(L, cone, 60, 2)
    assert c.metric == "cone" and c.max_ratio < 1.0 and c.within_bound
    assert invariance_check([L], cone, 20, 3).ok


def test_random_members_lie_in_cone():
    cone = ConeParams((2.0, 4.0))
    rng = np.random.default_rng(5)
    for basis, n in [("fourier", 16), ("chebyshev", 17)]:
        for _ in range(10):
            assert cone_membership(random_cone_member(cone, basis, n, rng), cone).member


def test_cone_distance_is_projective():
    cone = ConeParams((2.0, 4.0))
    rng = np.random.default_rng(2)
    x, y = (random_cone_member(cone, "fourier", 16, rng) for _ in range(2))
    assert cone_distance(x, y, cone) == pytest.approx(cone_distance(x * 3.0, y, cone), abs=1e-12)
    # the cone metric dominates the orthant metric (C_a lies inside the orthant)
    assert cone_distance(x, y, cone) >= hilbert_distance(x, y) - 1e-12


pos = arrays(np.float64, 4, elements=st.floats(0.01, 100.0))


@settings(max_examples=60, deadline=None)
@given(pos, pos, pos, st.floats(0.1, 10.0))
def test_hilbert_metric_axioms(x, y, z, c):
    dxy = hilbert_distance(x, y)
    assert dxy >= 0
    assert dxy == pytest.approx(hilbert_distance(y, x), abs=1e-12)
    assert hilbert_distance(c * x, y) == pytest.approx(dxy, abs=1e-9)
    assert dxy <= hilbert_distance(x, z) + hilbert_distance(z, y) + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(0.1, 10.0)), arrays(np.float64, 3, elements=st.floats(0.01, 100.0)),
       arrays(np.float64, 3, elements=st.floats(0.01, 100.0)))
def test_birkhoff_inequality_for_positive_matrices(A, x, y):
    d0 = hilbert_distance(x, y)
    lA = np.log(A)
    # projective diameter of the image of the orthant
    delta = max(
        lA[i, k] + lA[j, l] - lA[j, k] - lA[i, l]
        for i in range(3) for j in range(3) for k in range(3) for l in range(3)
    )
    assert hilbert_distance(A @ x, A @ y) <= math.tanh(delta / 4) * d0 + 1e-9
