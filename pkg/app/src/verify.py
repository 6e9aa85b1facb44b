# verify.py
"""Sampled hypothesis checks, index bookkeeping and a brute-force preimage oracle.

Every check is a seeded search for counterexamples: a passing report means
"no violation found in N samples", never a proof.
"""
import itertools
import logging
from typing import Optional, Protocol

import numpy as np
from pydantic import BaseModel
from scipy.optimize import linear_sum_assignment

from app.src.cones import NemitskiiDecomposition, certify_fine_perturbation, check_r_perturbation
from app.src.errors import (
    CriticalPoint,
    DimensionTooLarge,
    NoConvergence,
    NotPrimitive,
    SingularMatrix,
    SpecInvalid,
    SupplierMissing,
)
from app.src.fibers import (
    Fiber,
    FoldProblem,
    SolveReport,
    critical_points_on_fiber,
    solve_preimages,
    trace_fiber,
)
from app.src.nonlinear import NemitskiiMap
from app.src.spectral import count_above_one, linear_solve, operator_norm

logger = logging.getLogger(__name__)

__all__ = [
    "Violation",
    "HypothesisReport",
    "IndexReport",
    "OracleReport",
    "CriticalLineReport",
    "check_m_hypotheses",
    "check_r_hypotheses",
    "check_handr",
    "check_critical_lines",
    "brute_force_oracle",
    "index_at",
    "count_above_one",
    "gamma_threshold",
]


# ---- models

class Violation(BaseModel):
    sample: int
    check: str
    value: float
    detail: str = ""
    inputs: dict[str, list[float]] = {}


class HypothesisReport(BaseModel):
    hypothesis: str
    samples: int
    violations: list[Violation]
    margins: dict[str, float]
    passed: bool
    summary: str


class IndexReport(BaseModel):
    u: list[float]
    lambda_value: float
    index: int
    parity_count: int
    consistent: bool


class OracleReport(BaseModel):
    target: list[float]
    oracle_solutions: list[list[float]]
    engine_solutions: list[list[float]]
    match: bool
    max_distance: Optional[float] = None
    starts: int


class CriticalLineReport(BaseModel):
    anchors: int
    counts: list[int]
    passed: bool
    summary: str


class DecompositionSupplier(Protocol):
    R: float

    def split(self, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def floor(self, T) -> np.ndarray: ...


def _report(name: str, samples: int, violations: list[Violation], margins: dict[str, float]) -> HypothesisReport:
    violations = sorted(violations, key=lambda v: v.sample)
    if violations:
        summary = f"{len(violations)} violation(s) found in {samples} samples"
    else:
        summary = f"no violation found in {samples} samples"
    logger.info("%s: %s.", name, summary)
    return HypothesisReport(
        hypothesis=name,
        samples=samples,
        violations=violations,
        margins=margins,
        passed=not violations,
        summary=summary,
    )


def _ordered_triple(rng: np.random.Generator, n: int, scale: float):
    u = scale * rng.standard_normal(n)
    v = u + rng.uniform(0.1, 1.0, n)
    w = v + rng.uniform(0.1, 1.0, n)
    return u, v, w


# ---------------------------
# m-form hypotheses
# ---------------------------

def check_m_hypotheses(prob: FoldProblem, n_samples: int = 500, seed: int = 0, scale: float = 3.0) -> HypothesisReport:
    """(m-H) on the centred linearizations, strict (m-Conv) and (m-Convs)."""
    if prob.form != "m_form":
        raise SpecInvalid("check_m_hypotheses needs an m-form problem")
    rng = np.random.default_rng(seed)
    n, P, gamma = prob.dim, prob.P, prob.gamma_center
    Pi = prob.split.projector
    identity = np.eye(n)
    violations: list[Violation] = []

    if not prob.b_hat < prob.mu_hat:
        violations.append(
            Violation(sample=-1, check="m-H", value=prob.b_hat, detail=f"b_hat = {prob.b_hat:.6g} is not below mu_hat = {prob.mu_hat:.6g}")
        )

    worst_norm = 0.0
    worst_conv = np.inf
    worst_convs = np.inf
    for k in range(n_samples):
        u = scale * rng.standard_normal(n)
        v = scale * rng.standard_normal(n)
        G = P.linearize(u, v) - gamma * identity
        norm = operator_norm(Pi @ G)
        worst_norm = max(worst_norm, norm)
        if norm > prob.b_hat * (1.0 + 1e-12) + 1e-12:
            violations.append(
                Violation(sample=k, check="m-H", value=norm, detail=f"||Pi G|| above b_hat = {prob.b_hat:.6g}",
                          inputs={"u": u.tolist(), "v": v.tolist()})
            )
        cert = certify_fine_perturbation(G, prob.mu_hat, prob.b_hat)
        if not cert.member:
            reason = "not symmetric" if not cert.symmetric else ("no shift makes it nonnegative" if cert.p_min is None else "norm bound")
            violations.append(
                Violation(sample=k, check="fine-perturbation", value=cert.norm_bound, detail=reason,
                          inputs={"u": u.tolist(), "v": v.tolist()})
            )

        a, b, c = _ordered_triple(rng, n, scale)
        Pa, Pb, Pc = P(a), P(b), P(c)
        terms = (float((b - a) @ Pc), float((c - b) @ Pa), float((a - c) @ Pb))
        conv = sum(terms)
        worst_conv = min(worst_conv, conv)
        if conv <= 1e-12 * (1.0 + sum(abs(x) for x in terms)):
            violations.append(
                Violation(sample=k, check="m-Conv", value=conv, detail="triple expression not strictly positive",
                          inputs={"u": a.tolist(), "v": b.tolist(), "w": c.tolist()})
            )

        D = P.jacobian(b) - P.jacobian(a)
        low = float(np.min(D))
        worst_convs = min(worst_convs, low)
        if low < -1e-12 * (1.0 + float(np.max(np.abs(D)))):
            violations.append(
                Violation(sample=k, check="m-Convs", value=low, detail="J(v) - J(u) has a negative entry",
                          inputs={"u": a.tolist(), "v": b.tolist()})
            )

    margins = {
        "m-H": prob.mu_hat - prob.b_hat,
        "m-H sampled": prob.b_hat - worst_norm,
        "m-Conv": float(worst_conv),
        "m-Convs": float(worst_convs),
    }
    return _report("m-hypotheses", n_samples, violations, margins)


# ---------------------------
# r-form hypotheses
# ---------------------------

def gamma_threshold(lambda_m: float, mu_m: float, b: float) -> float:
    """Smallest gamma for which the canonical Nemitskii remainder fits under 1 - r2(T).

    ||B|| = (b - lambda_m) / gamma and 1 - r2(T) = Delta / (Delta + gamma), Delta = mu_m - lambda_m.
    """
    excess = b - lambda_m
    delta = mu_m - lambda_m
    if excess <= 0:
        return 0.0
    if excess >= delta:
        return float("inf")
    return excess * delta / (delta - excess)


def _default_supplier(prob: FoldProblem) -> DecompositionSupplier:
    if isinstance(prob.P, NemitskiiMap):
        return NemitskiiDecomposition(floor_slope=prob.P.profile.a)
    raise SupplierMissing(f"no canonical decomposition for {prob.P.kind} maps")


def check_r_hypotheses(
    prob: FoldProblem,
    supplier: Optional[DecompositionSupplier] = None,
    n_samples: int = 200,
    seed: int = 0,
    b: Optional[float] = None,
    scale: float = 3.0,
) -> HypothesisReport:
    """(r-H) via an explicit split G = A + B, the single-eigenvalue-above-1 test and (r-Conv)."""
    if prob.form != "r_form":
        raise SpecInvalid("check_r_hypotheses needs an r-form problem")
    if supplier is None:
        supplier = _default_supplier(prob)
    rng = np.random.default_rng(seed)
    n, P, T = prob.dim, prob.P, prob.operator
    certificate = prob.linear.certificate
    if b is None:
        b = certificate.gap_margin if certificate is not None else 1.0 - prob.linear.triple.gap_value
    S_floor = supplier.floor(T)
    violations: list[Violation] = []
    if isinstance(P, NemitskiiMap) and P.profile.a <= 0.0:
        violations.append(
            Violation(sample=-1, check="r-slopes", value=float(P.profile.a),
                      detail="profile slope floor is not positive; G T leaves the positive cone")
        )

    worst_b = 0.0
    worst_floor = np.inf
    worst_conv = np.inf
    for k in range(n_samples):
        u = scale * rng.standard_normal(n)
        v = scale * rng.standard_normal(n)
        G = P.linearize(u, v)
        A, B = supplier.split(G)
        check = check_r_perturbation(A, B, T, S_floor, supplier.R, b)
        worst_b = max(worst_b, check.norm_b)
        worst_floor = min(worst_floor, float(np.min(A @ T - S_floor)))
        for failure in check.failures:
            violations.append(
                Violation(sample=k, check="r-H", value=check.norm_b, detail=failure, inputs={"u": u.tolist(), "v": v.tolist()})
            )

        try:
            above = count_above_one(G @ T)
        except (NotPrimitive, NoConvergence) as e:
            violations.append(
                Violation(sample=k, check="eigenvalues-above-one", value=float("nan"),
                          detail=f"G T is not primitive: {e}", inputs={"u": u.tolist(), "v": v.tolist()})
            )
            above = 0
        if above > 1:
            violations.append(
                Violation(sample=k, check="eigenvalues-above-one", value=float(above),
                          detail="G T has more than one eigenvalue above 1", inputs={"u": u.tolist(), "v": v.tolist()})
            )

        z2 = scale * rng.standard_normal(n)
        z1 = z2 + rng.uniform(0.1, 1.0, n)
        y2 = z2 + rng.uniform(0.1, 1.0, n)
        y1 = np.maximum(y2, z1) + rng.uniform(0.1, 1.0, n)
        D = P.linearize(y1, z1) - P.linearize(y2, z2)
        off = D - np.diag(np.diag(D))
        low = float(np.min(np.diag(D)))
        worst_conv = min(worst_conv, low)
        if low <= 0.0 or float(np.min(off)) < -1e-12:
            violations.append(
                Violation(sample=k, check="r-Conv", value=low, detail="G(y1, z1) - G(y2, z2) not positive",
                          inputs={"y1": y1.tolist(), "z1": z1.tolist(), "y2": y2.tolist(), "z2": z2.tolist()})
            )

    margins = {
        "r-H": b - worst_b,
        "floor": float(worst_floor),
        "r-Conv": float(worst_conv),
    }
    return _report("r-hypotheses", n_samples, violations, margins)


# ---------------------------
# Index and critical lines
# ---------------------------

def index_at(prob: FoldProblem, u, tol: float = 1e-8) -> IndexReport:
    u = np.asarray(u, dtype=float)
    lam = prob.lambda_value(u)
    if abs(lam) <= tol:
        raise CriticalPoint(f"lambda = {lam:.3e} is within {tol:g} of zero", lambda_value=lam)
    parity = prob.parity_count(u)
    index = 1 if parity % 2 == 0 else -1
    return IndexReport(
        u=u.tolist(),
        lambda_value=lam,
        index=index,
        parity_count=parity,
        consistent=index == (1 if lam > 0 else -1),
    )


def check_handr(fiber: Fiber, refine_tol: float = 1e-8) -> HypothesisReport:
    """Sign of the centred difference of h against the sign of lambda on interior samples."""
    t, h, lam = fiber.t_samples, fiber.h_samples, fiber.lambda_samples
    violations = []
    tested = 0
    for k in range(1, fiber.nt - 1):
        if abs(lam[k]) <= 10.0 * refine_tol:
            continue
        if np.sign(lam[k - 1]) != np.sign(lam[k]) or np.sign(lam[k + 1]) != np.sign(lam[k]):
            continue
        tested += 1
        slope = (h[k + 1] - h[k - 1]) / (t[k + 1] - t[k - 1])
        if np.sign(slope) != np.sign(lam[k]):
            violations.append(
                Violation(sample=k, check="handr", value=float(slope), detail=f"lambda = {lam[k]:.6g} at t = {t[k]:.6g}")
            )
    return _report("handr", tested, violations, {})


def check_critical_lines(
    prob: FoldProblem,
    n_anchors: int = 10,
    seed: int = 0,
    window: tuple[float, float] = (-50.0, 50.0),
    nt: int = 256,
    scale: float = 1.0,
) -> CriticalLineReport:
    """Search random fibers for critical points; an empty fiber is reported, not proved."""
    rng = np.random.default_rng(seed)
    counts = []
    for _ in range(n_anchors):
        z = prob.split.project_W(scale * rng.standard_normal(prob.dim))
        fiber = trace_fiber(prob, z, window[0], window[1], nt)
        counts.append(len(critical_points_on_fiber(fiber)))
    missing = sum(1 for c in counts if c == 0)
    if missing:
        summary = f"no critical point found on {missing} of {n_anchors} fibers"
    else:
        summary = f"critical points found on all {n_anchors} fibers"
    logger.info("Critical lines: %s.", summary)
    return CriticalLineReport(anchors=n_anchors, counts=counts, passed=missing == 0, summary=summary)


# ---------------------------
# Brute-force oracle
# ---------------------------

def _newton_from(prob: FoldProblem, g: np.ndarray, u: np.ndarray, max_iter: int = 80) -> tuple[np.ndarray, float]:
    res = float(np.linalg.norm(prob.evaluate(u) - g))
    for _ in range(max_iter):
        if res <= 1e-13 * (1.0 + float(np.linalg.norm(g))):
            break
        try:
            step = linear_solve(prob.jacobian(u), g - prob.evaluate(u))
        except SingularMatrix:
            break
        scale = 1.0
        for _ in range(40):
            trial = u + scale * step
            trial_res = float(np.linalg.norm(prob.evaluate(trial) - g))
            if trial_res < res:
                u, res = trial, trial_res
                break
            scale *= 0.5
        else:
            break
    return u, res


def _deduplicate(points: list[np.ndarray], radius: float = 1e-6) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    return sorted(kept, key=lambda p: tuple(p))


def brute_force_oracle(
    prob: FoldProblem,
    g,
    box: Optional[list[tuple[float, float]]] = None,
    grid_per_axis: int = 7,
    window: tuple[float, float] = (-50.0, 50.0),
    nt: int = 512,
    engine: Optional[SolveReport] = None,
    require_stable_window: bool = True,
) -> OracleReport:
    """Multistart Newton over a grid of the box, paired against solve_preimages.

    Only roots whose fiber coordinate lies in the t window are compared.
    """
    if prob.dim > 3:
        raise DimensionTooLarge(f"the oracle runs at dimension <= 3, got {prob.dim}")
    g = np.asarray(g, dtype=float)
    if box is None:
        box = [(-20.0, 20.0)] * prob.dim
    if len(box) != prob.dim:
        raise SpecInvalid(f"box has {len(box)} axes for dimension {prob.dim}")

    accept = 1e-10 * (1.0 + float(np.linalg.norm(g)))
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in box]
    found = []
    starts = 0
    for node in itertools.product(*axes):
        starts += 1
        u, res = _newton_from(prob, g, np.array(node, dtype=float))
        if res <= accept:
            found.append(u)
    oracle = [p for p in _deduplicate(found) if window[0] <= prob.split.height(p) <= window[1]]

    if engine is None:
        engine = solve_preimages(prob, g, window=window, nt=nt, require_stable_window=require_stable_window)
    engine_points = [np.asarray(s.u) for s in engine.solutions]

    match = len(oracle) == len(engine_points)
    max_distance = None
    if match and oracle:
        cost = np.array([[np.linalg.norm(p - q) for q in engine_points] for p in oracle])
        rows, cols = linear_sum_assignment(cost)
        max_distance = float(np.max(cost[rows, cols]))
        match = max_distance <= 1e-6
    if not match:
        logger.warning("Oracle found %d preimage(s), engine %d.", len(oracle), len(engine_points))
    return OracleReport(
        target=g.tolist(),
        oracle_solutions=[p.tolist() for p in oracle],
        engine_solutions=[p.tolist() for p in engine_points],
        match=match,
        max_distance=max_distance,
        starts=starts,
    )
