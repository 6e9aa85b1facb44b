import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.src.errors import DimensionMismatch, NonSymmetricInput, NotPrimitive, SingularMatrix
from app.src.operators import ProblemSpec, build_model_operator
from app.src.spectral import (
    DenseOperator,
    SpectralTriple,
    cayley_transform,
    count_above_one,
    dominant_eigenpair,
    inverse,
    linear_solve,
    operator_norm,
    primitive_exponent,
    second_modulus,
    smallest_eigenvalue,
    symmetric_eigendecompose,
)
from tests.conftest import LAPLACE3_EIGENVALUES, LAPLACE3_GROUND

entries = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False, allow_subnormal=False)


def laplacian3() -> np.ndarray:
    return 16.0 * np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])


# ---- DenseOperator

def test_dense_operator_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        DenseOperator(np.zeros((2, 3)))


def test_dense_operator_checks_symmetric_flag():
    with pytest.raises(NonSymmetricInput):
        DenseOperator(np.array([[1.0, 2.0], [0.0, 1.0]]), symmetric=True)


def test_dense_operator_is_read_only():
    op = DenseOperator(np.eye(2))
    with pytest.raises(ValueError):
        op.entries[0, 0] = 3.0


# ---- eigendecomposition

def test_identity_eigenvalues():
    eig = symmetric_eigendecompose(np.eye(3))
    np.testing.assert_allclose(eig.eigenvalues, [1.0, 1.0, 1.0])
    np.testing.assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(3), atol=1e-12)


def test_diagonal_is_sorted():
    eig = symmetric_eigendecompose(np.diag([2.0, -1.0, 5.0]))
    np.testing.assert_allclose(eig.eigenvalues, [-1.0, 2.0, 5.0])
    np.testing.assert_allclose(np.abs(eig.eigenvectors), np.eye(3)[:, [1, 0, 2]], atol=1e-12)


def test_dirichlet_closed_form():
    eig = symmetric_eigendecompose(laplacian3())
    np.testing.assert_allclose(eig.eigenvalues, LAPLACE3_EIGENVALUES, atol=1e-9)
    ground = eig.eigenvectors[:, 0] * np.sign(eig.eigenvectors[1, 0])
    np.testing.assert_allclose(ground, LAPLACE3_GROUND, atol=1e-9)


@pytest.mark.parametrize("n", [5, 31, 64])
def test_jacobi_resolves_diagonally_dominant_laplacians(n):
    h = 1.0 / (n + 1)
    L = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    eig = symmetric_eigendecompose(L)
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(eig.eigenvalues, (2.0 - 2.0 * np.cos(k * np.pi * h)) / h**2, rtol=1e-10)
    assert operator_norm(L - eig.reconstruct()) <= 1e-10 * operator_norm(L)


def test_jacobi_with_tiny_coupling():
    A = np.diag(np.arange(1.0, 41.0) * 1e3) + 1e-3 * (np.eye(40, k=1) + np.eye(40, k=-1))
    eig = symmetric_eigendecompose(A)
    np.testing.assert_allclose(eig.eigenvalues, np.linalg.eigvalsh(A), rtol=1e-12)


def test_lapack_method_agrees_with_jacobi():
    A = laplacian3()
    np.testing.assert_allclose(
        symmetric_eigendecompose(A, method="lapack").eigenvalues,
        symmetric_eigendecompose(A).eigenvalues,
        atol=1e-10,
    )
    assert smallest_eigenvalue(A) == pytest.approx(LAPLACE3_EIGENVALUES[0], abs=1e-10)


def test_nonsymmetric_rejected():
    with pytest.raises(NonSymmetricInput):
        symmetric_eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 5), elements=entries))
def test_jacobi_reconstruction_and_orthogonality(X):
    A = X + X.T
    eig = symmetric_eigendecompose(A)
    scale = max(operator_norm(A), 1.0)
    assert operator_norm(A - eig.reconstruct()) <= 1e-10 * scale
    np.testing.assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(5), atol=1e-10)
    assert np.all(np.diff(eig.eigenvalues) >= 0)


# ---- Perron pairs

def test_dominant_rank_one():
    rho, v = dominant_eigenpair(np.ones((2, 2)))
    assert rho == pytest.approx(2.0)
    np.testing.assert_allclose(v, np.ones(2) / np.sqrt(2.0), atol=1e-10)


def test_dominant_circulant():
    rho, v = dominant_eigenpair(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert rho == pytest.approx(3.0)
    np.testing.assert_allclose(v, np.ones(2) / np.sqrt(2.0), atol=1e-10)


def test_dominant_of_cayley_transform():
    L = laplacian3() - LAPLACE3_EIGENVALUES[0] * np.eye(3)
    T = cayley_transform(DenseOperator(L, symmetric=True), 1.0)
    rho, v = dominant_eigenpair(T, tol=1e-12)
    assert rho == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(v, LAPLACE3_GROUND, atol=1e-8)


def test_dominant_rejects_reducible():
    with pytest.raises(NotPrimitive):
        dominant_eigenpair(np.diag([1.0, 2.0]))


def test_primitive_exponent():
    assert primitive_exponent(np.ones((3, 3))) == 1
    # path graph with self loops needs two steps
    assert primitive_exponent(np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])) == 2
    assert primitive_exponent(np.array([[0.0, 1.0], [1.0, 0.0]])) is None
    assert primitive_exponent(-np.ones((2, 2))) is None


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(min_value=0.1, max_value=5.0)))
def test_second_modulus_matches_eigvals(X):
    A = X + X.T
    rho, phi = dominant_eigenpair(A, tol=1e-12)
    _, phi_star = dominant_eigenpair(A.T, tol=1e-12)
    moduli = np.sort(np.abs(np.linalg.eigvalsh(A)))
    assert rho == pytest.approx(moduli[-1], rel=1e-9)
    assert second_modulus(A, rho, phi, phi_star) == pytest.approx(moduli[-2], rel=1e-6, abs=1e-9)


def test_count_above_one():
    assert count_above_one(np.zeros((3, 3))) == 0
    assert count_above_one(0.1 * np.ones((3, 3))) == 0
    assert count_above_one(np.ones((3, 3))) == 1
    A = np.array([[3.0, 1.0], [1.0, 3.0]])  # eigenvalues 4 and 2
    assert count_above_one(A) == 2


# ---- solves and transforms

def test_identity_solve():
    np.testing.assert_allclose(linear_solve(np.eye(2), [3.0, -1.0]), [3.0, -1.0])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=entries), arrays(np.float64, (4,), elements=entries))
def test_solve_residual(X, b):
    A = X + 50.0 * np.eye(4)
    x = linear_solve(A, b)
    bound = 1e-10 * (operator_norm(A) * np.linalg.norm(x) + np.linalg.norm(b))
    assert np.linalg.norm(A @ x - b) <= bound + 1e-300


def test_singular_detected():
    with pytest.raises(SingularMatrix):
        linear_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0])
    with pytest.raises(SingularMatrix):
        inverse(np.zeros((2, 2)))


def test_cayley_spectrum():
    model = build_model_operator(ProblemSpec(kind="dirichlet_laplacian_1d", n=3))
    T = cayley_transform(model.L, 2.0)
    expected = np.sort(2.0 / (LAPLACE3_EIGENVALUES + 2.0))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(T.entries)), expected, atol=1e-12)
    assert T.symmetric


def test_operator_norm_is_spectral():
    assert operator_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0)


# ---- SpectralTriple

def test_triple_normalizes():
    triple = SpectralTriple.from_vectors(1.0, 0.5, [2.0, 2.0], [1.0, 3.0], form="r")
    assert np.linalg.norm(triple.phi_vector) == pytest.approx(1.0)
    assert triple.phi_star_vector @ triple.phi_vector == pytest.approx(1.0)
    assert triple.strictly_positive


def test_triple_rejects_bad_normalization():
    with pytest.raises(ValueError):
        SpectralTriple(primary_value=1.0, gap_value=2.0, phi=[1.0, 1.0], phi_star=[1.0, 1.0])
