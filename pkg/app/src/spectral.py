# spectral.py
"""Dense linear-algebra kernels.

Symmetric eigendecomposition (cyclic Jacobi), power iteration for dominant
eigenpairs of nonnegative matrices, deflation for the second modulus, pivoted
solves, operator norms and the conformal transform T = gamma (L + gamma I)^-1.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import linalg as sla

from app.src.errors import (
    DimensionMismatch,
    NoConvergence,
    NonSymmetricInput,
    NotPrimitive,
    SingularMatrix,
    SingularShift,
)

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class DenseOperator:
    """A square real matrix; row index is the output coordinate."""

    entries: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise DimensionMismatch(f"operator must be a non-empty square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("operator entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if self.symmetric and not is_symmetric(arr):
            raise NonSymmetricInput("operator flagged symmetric fails max|A - A^T| <= 1e-12 max|A|")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        return self.entries @ np.asarray(other, dtype=float)

    @property
    def T(self) -> "DenseOperator":
        return DenseOperator(self.entries.T, symmetric=self.symmetric)


OperatorLike = Union[DenseOperator, np.ndarray]


def as_matrix(A: OperatorLike) -> np.ndarray:
    if isinstance(A, DenseOperator):
        return A.entries
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
    return arr


def is_symmetric(A: OperatorLike, rtol: float = SYMMETRY_RTOL) -> bool:
    M = as_matrix(A)
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    return float(np.max(np.abs(M - M.T))) <= rtol * scale


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T


def operator_norm(A: OperatorLike) -> float:
    """Spectral norm sqrt(r(A^T A))."""
    M = as_matrix(A)
    return float(np.linalg.norm(M, 2))


def balancing_weights(phi, phi_star) -> np.ndarray:
    """Diagonal d with diag(d)^-1 (I - phi phi*^T) diag(d) an orthogonal projector.

    phi and phi* must share a strict sign entrywise; phi = phi* gives d = 1.
    """
    phi = np.asarray(phi, dtype=float)
    phi_star = np.asarray(phi_star, dtype=float)
    if np.allclose(phi, phi_star, rtol=0.0, atol=1e-12):
        return np.ones_like(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = phi / phi_star
    if not np.all(np.isfinite(ratio) & (ratio > 0)):
        raise NotPrimitive("phi and phi* do not share a strict sign; no balancing weights")
    return np.sqrt(ratio)


def balanced_norm(A: OperatorLike, d) -> float:
    """||diag(d)^-1 A diag(d)||, the operator norm of A in the weighted norm |x / d|."""
    d = np.asarray(d, dtype=float)
    return operator_norm(as_matrix(A) * d[None, :] / d[:, None])


# ---------------------------
# Symmetric eigendecomposition
# ---------------------------

def _jacobi_rotate(A: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    apq = A[p, q]
    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 1.0 / (2.0 * theta)
    else:
        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    col_p = A[:, p].copy()
    col_q = A[:, q].copy()
    A[:, p] = c * col_p - s * col_q
    A[:, q] = s * col_p + c * col_q
    row_p = A[p, :].copy()
    row_q = A[q, :].copy()
    A[p, :] = c * row_p - s * row_q
    A[q, :] = s * row_p + c * row_q
    A[p, q] = A[q, p] = 0.0

    vp = V[:, p].copy()
    vq = V[:, q].copy()
    V[:, p] = c * vp - s * vq
    V[:, q] = s * vp + c * vq


def _off_diagonal_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M - np.diag(np.diag(M))))


def symmetric_eigendecompose(
    A: OperatorLike,
    tol: float = 1e-10,
    max_sweeps: int = 100,
    method: Literal["jacobi", "lapack"] = "jacobi",
) -> EigenDecomposition:
    """Eigenvalues ascending with orthonormal eigenvectors.

    The default cyclic Jacobi path checks reconstruction and orthogonality at
    ``tol`` before returning; ``method="lapack"`` hands off to numpy.linalg.eigh.
    """
    M = as_matrix(A)
    if not is_symmetric(M):
        raise NonSymmetricInput("symmetric_eigendecompose needs a symmetric matrix")
    n = M.shape[0]
    M = 0.5 * (M + M.T)

    if method == "lapack":
        values, vectors = np.linalg.eigh(M)
        return EigenDecomposition(values, vectors, sweeps=0)

    work = M.copy()
    V = np.eye(n)
    frob = float(np.linalg.norm(M))
    target = 1e-13 * frob
    sweeps = 0
    converged = n == 1
    for sweeps in range(1, max_sweeps + 1):
        off = _off_diagonal_norm(work)
        if off <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(work[p, q]) > 1e-300:
                    _jacobi_rotate(work, V, p, q)
    else:
        off = _off_diagonal_norm(work)
        converged = off <= target
    if not converged:
        raise NoConvergence(f"Jacobi exceeded {max_sweeps} sweeps", iterations=max_sweeps)

    values = np.diag(work).copy()
    order = np.argsort(values, kind="stable")
    eig = EigenDecomposition(values[order], V[:, order], sweeps=sweeps)

    scale = max(operator_norm(M), 1.0)
    recon = operator_norm(M - eig.reconstruct())
    ortho = float(np.max(np.abs(eig.eigenvectors.T @ eig.eigenvectors - np.eye(n))))
    if recon > tol * scale or ortho > tol:
        raise NoConvergence(
            f"Jacobi result fails checks (reconstruction {recon:.3e}, orthogonality {ortho:.3e})",
            iterations=sweeps,
            residual=recon,
        )
    logger.debug("Jacobi converged in %d sweeps (n=%d).", sweeps, n)
    return eig


def smallest_eigenvalue(A: OperatorLike) -> float:
    """Smallest eigenvalue of a symmetric matrix (LAPACK path for per-sample use)."""
    M = as_matrix(A)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


# ---------------------------
# Positivity and power iteration
# ---------------------------

def _pattern_product(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return (X.astype(float) @ Y.astype(float)) > 0.0


def primitive_exponent(A: OperatorLike, pos_tol: Optional[float] = None) -> Optional[int]:
    """Smallest k with A^k entrywise positive, searched up to dim^2; None if absent.

    Powers of two are built by repeated squaring, then the exponent is located by
    binary search (once A^k > 0 every higher power stays positive).
    """
    M = as_matrix(A)
    n = M.shape[0]
    if pos_tol is None:
        pos_tol = 1e-12 * float(np.max(np.abs(M)))
    if np.any(M < -pos_tol):
        return None
    pattern = M > pos_tol
    limit = n * n

    squares = [pattern]
    k = 1
    while not squares[-1].all():
        if k >= limit:
            return None
        squares.append(_pattern_product(squares[-1], squares[-1]))
        k *= 2

    def power(m: int) -> np.ndarray:
        result = None
        bit = 0
        while m:
            if m & 1:
                result = squares[bit] if result is None else _pattern_product(result, squares[bit])
            m >>= 1
            bit += 1
        return result

    lo, hi = k // 2, k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if power(mid).all():
            hi = mid
        else:
            lo = mid
    return hi if hi <= limit else None


def dominant_eigenpair(A: OperatorLike, tol: float = 1e-10, max_iter: int = 10000) -> tuple[float, np.ndarray]:
    """Perron root and unit positive eigenvector of a primitive nonnegative matrix."""
    M = as_matrix(A)
    if primitive_exponent(M) is None:
        raise NotPrimitive("power iteration needs a primitive nonnegative matrix")
    n = M.shape[0]
    norm = operator_norm(M)
    v = np.full(n, 1.0 / np.sqrt(n))
    rho = 0.0
    residual = np.inf
    for _ in range(max_iter):
        w = M @ v
        rho = float(v @ w)
        residual = float(np.linalg.norm(w - rho * v))
        if residual <= tol * norm:
            break
        v = w / np.linalg.norm(w)
    else:
        raise NoConvergence(
            f"power iteration residual {residual:.3e} above {tol * norm:.3e}",
            iterations=max_iter,
            residual=residual,
        )
    return rho, v


def second_modulus(
    A: OperatorLike,
    rho: float,
    phi: np.ndarray,
    phi_star: np.ndarray,
    max_iter: int = 10000,
    seed: int = 0,
) -> float:
    """Largest modulus among the non-primary eigenvalues.

    Deflates with the right/left pair (phi, phi_star), then runs power iteration on
    the square of the deflated matrix so that eigenvalues of opposite sign do not
    make the estimate oscillate. Assumes a real spectrum.
    """
    M = as_matrix(A)
    n = M.shape[0]
    if n == 1:
        return 0.0
    phi_star = phi_star / float(phi_star @ phi)
    deflated = M - rho * np.outer(phi, phi_star)
    B = deflated @ deflated

    v = np.random.default_rng(seed).standard_normal(n)
    v -= (phi_star @ v) * phi
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = B @ v
        size = float(np.linalg.norm(w))
        if size == 0.0:
            return 0.0
        if abs(size - estimate) <= 1e-15 * size:
            estimate = size
            break
        estimate = size
        v = w / size
    return float(np.sqrt(estimate))


def count_above_one(K: OperatorLike, tol: float = 1e-10) -> int:
    """Number of eigenvalues of a primitive nonnegative K above 1, counted up to two.

    Only the Perron root and the second modulus are examined; a third
    eigenvalue above 1 cannot change the parity tests this feeds.
    """
    M = as_matrix(K)
    if not np.any(M):
        return 0
    rho, phi = dominant_eigenpair(M, tol=tol)
    if rho <= 1.0:
        return 0
    _, phi_star = dominant_eigenpair(M.T, tol=tol)
    return 2 if second_modulus(M, rho, phi, phi_star) > 1.0 else 1


# ---------------------------
# Solves and transforms
# ---------------------------

def _lu(M: np.ndarray):
    scale = operator_norm(M)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or float(np.min(pivots)) < PIVOT_RTOL * scale:
        raise SingularMatrix(f"pivot {float(np.min(pivots)):.3e} below {PIVOT_RTOL:g} * ||A||")
    return lu, piv


def linear_solve(A: OperatorLike, rhs) -> np.ndarray:
    """Solve A x = rhs by LU with partial pivoting; rhs may hold several columns."""
    M = as_matrix(A)
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != M.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, operator has {M.shape[0]}")
    lu, piv = _lu(M)
    return sla.lu_solve((lu, piv), b, check_finite=False)


def inverse(A: OperatorLike) -> np.ndarray:
    M = as_matrix(A)
    return linear_solve(M, np.eye(M.shape[0]))


def cayley_transform(L: OperatorLike, gamma: float) -> DenseOperator:
    """T = gamma (L + gamma I)^-1, mapping each eigenvalue l to gamma / (l + gamma)."""
    M = as_matrix(L)
    shifted = M + gamma * np.eye(M.shape[0])
    try:
        T = gamma * inverse(shifted)
    except SingularMatrix as e:
        raise SingularShift(f"L + {gamma:g} I is numerically singular: {e}") from e
    symmetric = isinstance(L, DenseOperator) and L.symmetric
    if symmetric:
        T = 0.5 * (T + T.T)
    return DenseOperator(T, symmetric=symmetric)


# ---------------------------
# Certified eigendata
# ---------------------------

class SpectralTriple(BaseModel):
    """Basic-eigenvalue data: primary value, gap value and the right/left eigenvectors.

    ``form="m"`` stores (lambda_m, mu_m) with primary < gap; ``form="r"`` stores
    (r, second modulus) with gap < primary. Normalization <phi_star, phi> = 1 and
    ||phi|| = 1 is enforced on construction; positivity is established by the
    certifying functions.
    """

    model_config = ConfigDict(frozen=True)

    primary_value: float
    gap_value: float
    phi: list[float]
    phi_star: list[float]
    form: Literal["m", "r"] = "m"

    @model_validator(mode="after")
    def _check_normalization(self) -> "SpectralTriple":
        if len(self.phi) != len(self.phi_star) or not self.phi:
            raise ValueError("phi and phi_star must be non-empty and of equal length")
        phi = np.asarray(self.phi)
        if abs(float(np.linalg.norm(phi)) - 1.0) > 1e-8:
            raise ValueError("phi must have unit norm")
        if abs(float(np.asarray(self.phi_star) @ phi) - 1.0) > 1e-8:
            raise ValueError("<phi_star, phi> must equal 1")
        return self

    @property
    def dim(self) -> int:
        return len(self.phi)

    @property
    def phi_vector(self) -> np.ndarray:
        return np.asarray(self.phi, dtype=float)

    @property
    def phi_star_vector(self) -> np.ndarray:
        return np.asarray(self.phi_star, dtype=float)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.phi_vector > 0) and np.all(self.phi_star_vector > 0))

    def residuals(self, S: OperatorLike) -> tuple[float, float]:
        M = as_matrix(S)
        phi, phi_star = self.phi_vector, self.phi_star_vector
        right = float(np.linalg.norm(M @ phi - self.primary_value * phi))
        left = float(np.linalg.norm(M.T @ phi_star - self.primary_value * phi_star))
        return right, left

    @classmethod
    def from_vectors(cls, primary: float, gap: float, phi, phi_star, form: Literal["m", "r"] = "m") -> "SpectralTriple":
        """Normalize ||phi|| = 1 and <phi_star, phi> = 1 before building."""
        phi = np.asarray(phi, dtype=float)
        phi = phi / np.linalg.norm(phi)
        phi_star = np.asarray(phi_star, dtype=float)
        pairing = float(phi_star @ phi)
        if abs(pairing) <= 1e-12:
            raise ValueError("phi_star is orthogonal to phi")
        phi_star = phi_star / pairing
        return cls(
            primary_value=float(primary),
            gap_value=float(gap),
            phi=phi.tolist(),
            phi_star=phi_star.tolist(),
            form=form,
        )
