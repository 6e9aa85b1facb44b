import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.src.errors import BadNormalization, BadSlopes, DimensionMismatch, NonPositiveWeight, NotPositivelyStable
from app.src.nonlinear import (
    linear_map,
    linearize,
    make_convex_profile,
    nemitskii,
    nonlocal_map,
    vertical_sine_map,
    zero_map,
)
from app.src.spectral import balanced_norm, balancing_weights, operator_norm

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)
PROFILE = make_convex_profile(5.0, 15.0, 1.0)


def tridiagonal(n: int, off: float = 0.1) -> np.ndarray:
    return np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))


def test_profile_values():
    assert PROFILE.f(0.0) == 0.0
    assert PROFILE.fprime(0.0) == pytest.approx(10.0)
    assert PROFILE.fprime(1e8) == pytest.approx(15.0)
    assert PROFILE.fprime(-1e8) == pytest.approx(5.0)
    assert PROFILE.fsecond(0.0) == pytest.approx(5.0)


def test_profile_guards():
    with pytest.raises(BadSlopes):
        make_convex_profile(15.0, 5.0)
    with pytest.raises(BadSlopes):
        make_convex_profile(1.0, 2.0, kappa=0.0)


def test_shifted_and_rescaled():
    shifted = PROFILE.shifted(10.0)
    assert (shifted.a, shifted.b) == (-5.0, 5.0)
    rescaled = PROFILE.shifted(10.0).rescaled(50.0)
    assert rescaled.a == pytest.approx(0.9)
    assert rescaled.b == pytest.approx(1.1)
    t = np.linspace(-5.0, 5.0, 11)
    np.testing.assert_allclose(rescaled.f(t), t + (PROFILE.f(t) - 10.0 * t) / 50.0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(finite, finite)
def test_quotient_is_newton_quotient(r, s):
    q = PROFILE.quotient(r, s)
    assert 5.0 <= q <= 15.0
    if abs(r - s) > 1e-3:
        assert q == pytest.approx((PROFILE.f(r) - PROFILE.f(s)) / (r - s), rel=1e-8, abs=1e-8)


def test_quotient_on_diagonal_is_derivative():
    t = np.linspace(-3.0, 3.0, 7)
    np.testing.assert_allclose(PROFILE.quotient(t, t), PROFILE.fprime(t))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4,), elements=finite), arrays(np.float64, (4,), elements=finite))
def test_two_point_identity_all_kinds(u, v):
    phi = np.full(4, 0.5)
    maps = [
        nemitskii(PROFILE, 4),
        nonlocal_map(tridiagonal(4), np.array([1.0, 2.0, 1.0, 0.5]), PROFILE),
        vertical_sine_map(phi, phi, 3.0),
        linear_map(np.arange(16.0).reshape(4, 4)),
    ]
    for P in maps:
        lhs = P(u) - P(v)
        rhs = linearize(P, u, v) @ (u - v)
        scale = 1.0 + np.linalg.norm(P(u)) + np.linalg.norm(P(v))
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * scale
        np.testing.assert_allclose(P.linearize(u, u), P.jacobian(u), atol=1e-9 * scale)


def test_nemitskii_is_componentwise():
    P = nemitskii(PROFILE, 3)
    u = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(P(u), PROFILE.f(u))
    np.testing.assert_allclose(P.jacobian(u), np.diag(PROFILE.fprime(u)))
    with pytest.raises(DimensionMismatch):
        P(np.zeros(2))


def test_nemitskii_slice_bound():
    P = nemitskii(PROFILE, 3)
    assert P.default_center(None, None) == 10.0
    assert P.slice_bound(10.0, None, None) == 5.0
    assert P.slice_bound(12.0, None, None) == 7.0


def test_nonlocal_guards():
    with pytest.raises(NotPositivelyStable):
        nonlocal_map(-tridiagonal(3), np.ones(3), PROFILE)
    with pytest.raises(NotPositivelyStable):
        nonlocal_map(np.array([[1.0, 0.0], [0.0, 0.0]]), np.ones(2), PROFILE)
    with pytest.raises(NonPositiveWeight):
        nonlocal_map(tridiagonal(3), np.array([1.0, 0.0, 1.0]), PROFILE)


def test_nonlocal_is_gradient_and_symmetric():
    A = tridiagonal(5)
    g = np.linspace(0.5, 1.5, 5)
    P = nonlocal_map(A, g, PROFILE)
    u = np.linspace(-2.0, 2.0, 5)
    J = P.jacobian(u)
    np.testing.assert_allclose(J, J.T, atol=1e-12)
    # centred difference of the potential sum g_i F(<a_i, u>) reproduces P
    potential = lambda x: float(np.sum(g * (PROFILE.mid * (A @ x) ** 2 / 2 + PROFILE.half_range * (
        0.5 * (A @ x) * np.hypot(A @ x, 1.0) + 0.5 * np.arcsinh(A @ x) - A @ x))))
    eps = 1e-6
    grad = np.array([(potential(u + eps * e) - potential(u - eps * e)) / (2 * eps) for e in np.eye(5)])
    np.testing.assert_allclose(grad, P(u), rtol=1e-6, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5,), elements=finite), arrays(np.float64, (5,), elements=finite))
def test_nonlocal_slice_bound_covers_samples(u, v):
    P = nonlocal_map(tridiagonal(5), np.ones(5), PROFILE)
    phi = np.full(5, 1.0 / np.sqrt(5.0))
    gamma = P.default_center(phi, phi)
    assert operator_norm(P.linearize(u, v) - gamma * np.eye(5)) <= P.slice_bound(gamma, phi, phi) * (1 + 1e-12)


def test_slice_bounds_hold_for_an_oblique_split():
    phi = np.array([0.8, 0.6])
    phi_star = np.array([0.5, 1.0])
    Pi = np.eye(2) - np.outer(phi, phi_star)
    d = balancing_weights(phi, phi_star)
    balanced = Pi * d[None, :] / d[:, None]
    np.testing.assert_allclose(balanced, balanced.T, atol=1e-12)
    assert operator_norm(Pi) > 1.1
    assert balanced_norm(Pi, d) == pytest.approx(1.0)

    maps = [
        nemitskii(PROFILE, 2),
        nonlocal_map(tridiagonal(2, 0.5), np.array([1.0, 2.0]), PROFILE),
        vertical_sine_map(phi, phi_star, 3.0),
        linear_map(np.array([[2.0, 1.0], [0.5, 4.0]])),
    ]
    rng = np.random.default_rng(11)
    for P in maps:
        gamma = P.default_center(phi, phi_star)
        bound = P.slice_bound(gamma, phi, phi_star)
        for _ in range(100):
            G = P.linearize(5.0 * rng.standard_normal(2), 5.0 * rng.standard_normal(2))
            assert balanced_norm(Pi @ (G - gamma * np.eye(2)) @ Pi, d) <= bound * (1 + 1e-10) + 1e-12, P.kind


def test_vertical_sine_height():
    phi = np.array([0.6, 0.8])
    P = vertical_sine_map(phi, phi, 2.0)
    for t in (0.5, 2.0, -7.0):
        u = t * phi + np.array([0.8, -0.6])
        assert float(phi @ (2.0 * u - P(u))) == pytest.approx(t * np.sin(t), abs=1e-12)
    with pytest.raises(BadNormalization):
        vertical_sine_map(phi, 2.0 * phi, 2.0)


def test_zero_and_linear_maps():
    Z = zero_map(3)
    np.testing.assert_allclose(Z(np.ones(3)), np.zeros(3))
    B = np.diag([1.0, 2.0, 3.0])
    P = linear_map(B)
    phi = np.array([1.0, 0.0, 0.0])
    assert P.slice_bound(0.0, phi, phi) == pytest.approx(3.0)
