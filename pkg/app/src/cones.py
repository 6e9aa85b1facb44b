# cones.py
"""Positivity over the standard cone {v : v_i >= 0}.

Classifies operators as positivity preserving / ergodic, certifies basic
eigenvalues (items b-1, b-2, b-3) and checks fine-perturbation membership.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel

from app.src.errors import DegenerateWitness, GapTooSmall, NotErgodic
from app.src.spectral import (
    OperatorLike,
    SpectralTriple,
    as_matrix,
    dominant_eigenpair,
    is_symmetric,
    operator_norm,
    primitive_exponent,
    second_modulus,
)

logger = logging.getLogger(__name__)


# ---- models

class ConeCheckReport(BaseModel):
    preserving: bool
    ergodic: bool
    primitive_exponent: Optional[int] = None


class BasicEigenvalueCertificate(BaseModel):
    triple: SpectralTriple
    gap_margin: float
    simplicity_witness: float
    primitive_exponent: Optional[int] = None


class FinePerturbationCertificate(BaseModel):
    norm_bound: float
    b: float
    mu_m: float
    p_min: Optional[float]  # None when no p makes A + pI nonnegative
    symmetric: bool
    member: bool


class RPerturbationCheck(BaseModel):
    floor_ok: bool
    ceiling_ok: bool
    remainder_nonnegative: bool
    norm_a: float
    norm_b: float
    R: float
    b: float
    member: bool
    failures: list[str] = []


def default_pos_tol(A: OperatorLike) -> float:
    return 1e-12 * float(np.max(np.abs(as_matrix(A))))


def positivity_class(A: OperatorLike, pos_tol: Optional[float] = None) -> ConeCheckReport:
    M = as_matrix(A)
    if pos_tol is None:
        pos_tol = default_pos_tol(M)
    preserving = bool(np.all(M >= -pos_tol))
    ergodic = bool(np.all(M > pos_tol))
    exponent = primitive_exponent(M, pos_tol) if preserving else None
    return ConeCheckReport(preserving=preserving, ergodic=ergodic, primitive_exponent=exponent)


def certify_basic_eigenvalue(S: OperatorLike, tol: float = 1e-10) -> BasicEigenvalueCertificate:
    """Certify r(S) as a basic eigenvalue of a primitive nonnegative S.

    Raises the error for the first violated item: NotErgodic (b-1),
    GapTooSmall (b-2) or DegenerateWitness (b-3).
    """
    M = as_matrix(S)
    report = positivity_class(M)
    if not report.preserving:
        raise NotErgodic("operator has negative entries, so it does not preserve the cone")
    if not (report.ergodic or report.primitive_exponent is not None):
        raise NotErgodic("no power of the operator is entrywise positive")

    rho, phi = dominant_eigenpair(M, tol=tol)
    _, phi_star = dominant_eigenpair(M.T, tol=tol)
    if np.min(phi) <= 0 or np.min(phi_star) <= 0:
        raise NotErgodic("Perron vectors are not strictly positive")

    second = second_modulus(M, rho, phi, phi_star)
    gap = rho - second
    if gap <= tol:
        raise GapTooSmall(f"second modulus {second:.12g} within {tol:g} of r = {rho:.12g}")

    witness = float(phi_star @ phi)
    if abs(witness) <= tol:
        raise DegenerateWitness(f"<phi*, phi> = {witness:.3e}")

    triple = SpectralTriple.from_vectors(rho, second, phi, phi_star, form="r")
    logger.debug("Certified r = %.12g with gap %.6g.", rho, gap)
    return BasicEigenvalueCertificate(
        triple=triple,
        gap_margin=gap,
        simplicity_witness=witness,
        primitive_exponent=report.primitive_exponent,
    )


def certify_fine_perturbation(A: OperatorLike, mu_m: float, b: float) -> FinePerturbationCertificate:
    M = as_matrix(A)
    norm = operator_norm(M)
    off_diagonal = M - np.diag(np.diag(M))
    tol = default_pos_tol(M)
    if np.any(off_diagonal < -tol):
        p_min = None
    else:
        p_min = max(0.0, -float(np.min(np.diag(M))))
    symmetric = is_symmetric(M)
    member = symmetric and norm <= b < mu_m and p_min is not None
    return FinePerturbationCertificate(
        norm_bound=norm, b=b, mu_m=mu_m, p_min=p_min, symmetric=symmetric, member=member
    )


def check_r_perturbation(
    A: np.ndarray,
    B: np.ndarray,
    T: OperatorLike,
    S_floor: np.ndarray,
    R: float,
    b: float,
) -> RPerturbationCheck:
    """Check an explicit decomposition H = A + B against S <= A T <= T, B >= 0, ||A|| <= R, ||B|| <= b."""
    Tm = as_matrix(T)
    AT = A @ Tm
    tol = 1e-12 * max(float(np.max(np.abs(Tm))), 1.0)
    failures = []

    floor_ok = bool(np.all(AT >= S_floor - tol))
    if not floor_ok:
        failures.append(f"A T below floor by {float(np.max(S_floor - AT)):.3e}")
    ceiling_ok = bool(np.all(AT <= Tm + tol))
    if not ceiling_ok:
        failures.append(f"A T above T by {float(np.max(AT - Tm)):.3e}")
    remainder_nonnegative = bool(np.all(B >= -tol))
    if not remainder_nonnegative:
        failures.append(f"B has entry {float(np.min(B)):.3e}")
    norm_a = operator_norm(A)
    norm_b = operator_norm(B)
    if norm_a > R + tol:
        failures.append(f"||A|| = {norm_a:.6g} exceeds R = {R:.6g}")
    if norm_b > b + tol:
        failures.append(f"||B|| = {norm_b:.6g} exceeds b = {b:.6g}")

    return RPerturbationCheck(
        floor_ok=floor_ok,
        ceiling_ok=ceiling_ok,
        remainder_nonnegative=remainder_nonnegative,
        norm_a=norm_a,
        norm_b=norm_b,
        R=R,
        b=b,
        member=not failures,
        failures=failures,
    )


@dataclass(frozen=True)
class NemitskiiDecomposition:
    """Canonical split of a diagonal linearization: A = min(q, 1), B = q - min(q, 1)."""

    floor_slope: float
    R: float = 1.0

    def split(self, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q = np.diag(G)
        lower = np.minimum(q, 1.0)
        return np.diag(lower), np.diag(q - lower)

    def floor(self, T: OperatorLike) -> np.ndarray:
        return self.floor_slope * as_matrix(T)
