# operators.py
"""Model linear operators with certified spectral triples, and the m-form to r-form conversion."""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.src.cones import BasicEigenvalueCertificate, certify_basic_eigenvalue
from app.src.errors import (
    CertificateError,
    CertificationFailed,
    NoConvergence,
    NotPrimitive,
    SingularMatrix,
    SpecInvalid,
)
from app.src.spectral import (
    DenseOperator,
    OperatorLike,
    SpectralTriple,
    as_matrix,
    cayley_transform,
    inverse,
    is_symmetric,
    symmetric_eigendecompose,
)

logger = logging.getLogger(__name__)

OperatorKind = Literal[
    "dirichlet_laplacian_1d",
    "dirichlet_laplacian_2d",
    "neumann_laplacian_1d",
    "periodic_laplacian_1d",
    "harmonic_oscillator",
    "nondivergence_1d",
    "coupled_system",
    "fractional_power",
]

Samples = Union[float, list[float]]


class ProblemSpec(BaseModel):
    """Grid, domain and kind-specific parameters of a model operator."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: OperatorKind
    n: int = Field(31, ge=2)
    ny: Optional[int] = Field(None, ge=2)
    domain: tuple[float, float] = (0.0, 1.0)
    domain_y: tuple[float, float] = (0.0, 1.0)
    x_max: float = Field(8.0, gt=0)
    diffusion: Samples = 1.0
    drift: Samples = 0.0
    potential: Samples = 0.0
    alpha: float = 0.0
    s: float = 0.5
    base: Optional["ProblemSpec"] = None

    @model_validator(mode="after")
    def _check_kind_parameters(self) -> "ProblemSpec":
        if self.domain[1] <= self.domain[0] or self.domain_y[1] <= self.domain_y[0]:
            raise ValueError("domain extents must be increasing")
        if self.kind in ("coupled_system", "fractional_power") and self.base is None:
            raise ValueError(f"{self.kind} needs a base operator spec")
        if self.kind == "fractional_power" and not 0.0 < self.s < 1.0:
            raise ValueError("fractional exponent s must lie in (0, 1)")
        for name in ("diffusion", "drift", "potential"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.n:
                raise ValueError(f"{name} samples must have length n = {self.n}")
        return self

    @property
    def dimension(self) -> int:
        if self.kind == "dirichlet_laplacian_2d":
            return self.n * (self.ny or self.n)
        if self.kind == "coupled_system":
            return 2 * self.base.dimension
        if self.kind == "fractional_power":
            return self.base.dimension
        return self.n


ProblemSpec.model_rebuild()


@dataclass(frozen=True)
class ModelOperator:
    L: DenseOperator
    triple: SpectralTriple
    spec: Optional[ProblemSpec] = None
    self_adjoint: bool = True

    @property
    def dim(self) -> int:
        return self.L.dim

    @property
    def lambda_m(self) -> float:
        return self.triple.primary_value

    @property
    def mu_m(self) -> float:
        return self.triple.gap_value


@dataclass(frozen=True)
class RFormProblem:
    T: DenseOperator
    triple: SpectralTriple
    shift: float
    gamma: float
    source: Optional[ModelOperator] = None
    certificate: Optional[BasicEigenvalueCertificate] = None

    @property
    def dim(self) -> int:
        return self.T.dim


# ---------------------------
# Finite-difference stencils
# ---------------------------

def _second_difference(n: int, h: float) -> np.ndarray:
    return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / (h * h)


def _samples(value: Samples, n: int) -> np.ndarray:
    if isinstance(value, list):
        return np.asarray(value, dtype=float)
    return np.full(n, float(value))


def _interior_grid(lo: float, hi: float, n: int) -> tuple[np.ndarray, float]:
    h = (hi - lo) / (n + 1)
    return lo + h * np.arange(1, n + 1), h


def _nondivergence_matrix(spec: ProblemSpec) -> np.ndarray:
    """Centered differences for -a u'' - B u' - q u with Dirichlet ends."""
    n = spec.n
    _, h = _interior_grid(*spec.domain, n)
    a = _samples(spec.diffusion, n)
    B = _samples(spec.drift, n)
    q = _samples(spec.potential, n)
    if np.any(a <= 0):
        raise SpecInvalid("diffusion coefficient must be positive")
    if np.any(np.abs(B) * h / 2.0 >= a):
        raise SpecInvalid("grid too coarse for the drift: need |B| h / 2 < a for an M-matrix stencil")
    L = np.diag(2.0 * a / h**2 - q)
    L += np.diag(-a[1:] / h**2 + B[1:] / (2.0 * h), k=-1)
    L += np.diag(-a[:-1] / h**2 - B[:-1] / (2.0 * h), k=1)
    return L


def _stencil(spec: ProblemSpec) -> np.ndarray:
    n = spec.n
    if spec.kind == "dirichlet_laplacian_1d":
        _, h = _interior_grid(*spec.domain, n)
        return _second_difference(n, h)
    if spec.kind == "dirichlet_laplacian_2d":
        ny = spec.ny or n
        _, hx = _interior_grid(*spec.domain, n)
        _, hy = _interior_grid(*spec.domain_y, ny)
        return np.kron(np.eye(ny), _second_difference(n, hx)) + np.kron(_second_difference(ny, hy), np.eye(n))
    if spec.kind == "neumann_laplacian_1d":
        h = (spec.domain[1] - spec.domain[0]) / n
        L = _second_difference(n, h)
        L[0, 0] = L[-1, -1] = 1.0 / h**2
        return L
    if spec.kind == "periodic_laplacian_1d":
        h = (spec.domain[1] - spec.domain[0]) / n
        eye = np.eye(n)
        return (2.0 * eye - np.roll(eye, 1, axis=1) - np.roll(eye, -1, axis=1)) / h**2
    if spec.kind == "harmonic_oscillator":
        x, h = _interior_grid(-spec.x_max, spec.x_max, n)
        return _second_difference(n, h) + np.diag(x * x)
    if spec.kind == "nondivergence_1d":
        return _nondivergence_matrix(spec)
    raise SpecInvalid(f"no stencil for kind {spec.kind}")


# ---------------------------
# Certification
# ---------------------------

def _self_adjoint_triple(L: np.ndarray, tol: float = 1e-10) -> SpectralTriple:
    eig = symmetric_eigendecompose(L, tol=tol)
    values, vectors = eig.eigenvalues, eig.eigenvectors
    if len(values) < 2:
        raise CertificationFailed("operator needs dimension >= 2 to have a spectral gap")
    lambda_m, mu_m = float(values[0]), float(values[1])
    if mu_m - lambda_m <= tol * max(1.0, abs(lambda_m)):
        raise CertificationFailed(f"lambda_m = {lambda_m:.12g} is not simple")
    phi = vectors[:, 0] * np.sign(np.sum(vectors[:, 0]))
    if np.min(phi) <= 0:
        raise CertificationFailed("ground state is not strictly positive")
    return SpectralTriple.from_vectors(lambda_m, mu_m, phi, phi, form="m")


def _resolvent_triple(L: np.ndarray, tol: float = 1e-10) -> SpectralTriple:
    """Smallest eigenvalue of an M-matrix-like L from the Perron pair of (L + sigma I)^-1."""
    n = L.shape[0]
    off_row = np.sum(np.abs(L), axis=1) - np.abs(np.diag(L))
    sigma = max(0.0, float(np.max(off_row - np.diag(L)))) + 1.0
    try:
        resolvent = inverse(L + sigma * np.eye(n))
        cert = certify_basic_eigenvalue(resolvent, tol=tol)
    except (CertificateError, NotPrimitive, SingularMatrix, NoConvergence) as e:
        raise CertificationFailed(f"resolvent certification failed: {e}") from e
    rho, second = cert.triple.primary_value, cert.triple.gap_value
    lambda_m = 1.0 / rho - sigma
    mu_m = 1.0 / second - sigma if second > 0 else np.inf
    return SpectralTriple.from_vectors(lambda_m, mu_m, cert.triple.phi, cert.triple.phi_star, form="m")


def model_from_matrix(L: OperatorLike, spec: Optional[ProblemSpec] = None, tol: float = 1e-10) -> ModelOperator:
    """Certify an explicit matrix: Jacobi for symmetric input, resolvent power iteration otherwise."""
    M = as_matrix(L)
    if is_symmetric(M):
        M = 0.5 * (M + M.T)
        return ModelOperator(DenseOperator(M, symmetric=True), _self_adjoint_triple(M, tol), spec, True)
    return ModelOperator(DenseOperator(M), _resolvent_triple(M, tol), spec, False)


def fractional_power_matrix(A: OperatorLike, s: float) -> np.ndarray:
    eig = symmetric_eigendecompose(A)
    if np.min(eig.eigenvalues) <= 0:
        raise SpecInvalid("fractional powers need a positive definite operator")
    Q = eig.eigenvectors
    powered = (Q * eig.eigenvalues**s) @ Q.T
    return 0.5 * (powered + powered.T)


def operator_power(M: ModelOperator, k: int) -> ModelOperator:
    """L^k for a positive self-adjoint model operator, certified afresh."""
    if k < 1:
        raise SpecInvalid("power must be a positive integer")
    if not M.self_adjoint or M.lambda_m <= 0:
        raise SpecInvalid("powers are built for positive self-adjoint operators")
    return model_from_matrix(np.linalg.matrix_power(M.L.entries, k), M.spec)


def build_model_operator(spec: ProblemSpec) -> ModelOperator:
    if spec.kind == "coupled_system":
        base = build_model_operator(spec.base)
        if not -base.lambda_m < spec.alpha < base.mu_m:
            raise SpecInvalid(
                f"coupling alpha = {spec.alpha} outside (-lambda_m, mu_m) = ({-base.lambda_m:.6g}, {base.mu_m:.6g})"
            )
        n = base.dim
        coupling = -spec.alpha * np.eye(n)
        block = np.block([[base.L.entries, coupling], [coupling, base.L.entries]])
        model = model_from_matrix(block, spec)
    elif spec.kind == "fractional_power":
        base = build_model_operator(spec.base)
        if not base.self_adjoint:
            raise SpecInvalid("fractional powers are built for self-adjoint bases")
        model = model_from_matrix(fractional_power_matrix(base.L, spec.s), spec)
    else:
        model = model_from_matrix(_stencil(spec), spec)
    logger.info(
        "Built %s (dim=%d): lambda_m=%.10g, mu_m=%.10g.", spec.kind, model.dim, model.lambda_m, model.mu_m
    )
    return model


# ---------------------------
# m-special checks and the r-form
# ---------------------------

class ResolventCheck(BaseModel):
    mu: float
    min_entry: float
    argmin: tuple[int, int]
    positive: bool


class MSpecialReport(BaseModel):
    lambda_m: float
    mu_m: float
    gap: float
    simple: bool
    checks: list[ResolventCheck]
    violations: list[str]
    passed: bool


def verify_m_special(
    M: Union[ModelOperator, OperatorLike],
    mu_samples: list[float],
    tol: float = 1e-10,
) -> MSpecialReport:
    """Test resolvent positivity below lambda_m and simplicity of lambda_m."""
    if isinstance(M, ModelOperator):
        L = M.L.entries
        lambda_m, mu_m = M.lambda_m, M.mu_m
    else:
        L = as_matrix(M)
        eig = symmetric_eigendecompose(L, tol=tol)
        lambda_m, mu_m = float(eig.eigenvalues[0]), float(eig.eigenvalues[1])

    n = L.shape[0]
    checks, violations = [], []
    for mu in mu_samples:
        if mu >= lambda_m - tol:
            violations.append(f"mu = {mu:g} is not below lambda_m = {lambda_m:.10g}")
            continue
        R = inverse(L - mu * np.eye(n))
        i, j = np.unravel_index(int(np.argmin(R)), R.shape)
        min_entry = float(R[i, j])
        positive = min_entry > 0.0
        checks.append(ResolventCheck(mu=mu, min_entry=min_entry, argmin=(int(i), int(j)), positive=positive))
        if not positive:
            violations.append(f"(L - {mu:g})^-1 has entry {min_entry:.3e} at ({i}, {j})")

    gap = mu_m - lambda_m
    simple = gap > tol
    if not simple:
        violations.append(f"lambda_m is not simple (gap {gap:.3e})")
    return MSpecialReport(
        lambda_m=lambda_m, mu_m=mu_m, gap=gap, simple=simple, checks=checks,
        violations=violations, passed=not violations,
    )


def to_r_form(M: ModelOperator, gamma: float, tol: float = 1e-10) -> RFormProblem:
    """T = gamma (L - lambda_m I + gamma I)^-1, certified r-special with r(T) = 1.

    Certification requires T to be primitive (some power strictly positive),
    which is stronger than the ergodic condition the r-form needs; an ergodic
    but periodic T fails certification.
    """
    if gamma <= 0:
        raise SpecInvalid("gamma must be positive")
    shifted = M.L.entries - M.lambda_m * np.eye(M.dim)
    T = cayley_transform(DenseOperator(shifted, symmetric=M.self_adjoint), gamma)
    try:
        cert = certify_basic_eigenvalue(T, tol=tol)
    except (CertificateError, NotPrimitive, NoConvergence) as e:
        raise CertificationFailed(f"T is not r-special: {e}") from e
    r = cert.triple.primary_value
    if abs(r - 1.0) > 1e-8:
        raise CertificationFailed(f"r(T) = {r:.12g}, expected 1")
    logger.info("r-form at gamma=%g: second modulus %.6g.", gamma, cert.triple.gap_value)
    return RFormProblem(T=T, triple=cert.triple, shift=M.lambda_m, gamma=gamma, source=M, certificate=cert)
