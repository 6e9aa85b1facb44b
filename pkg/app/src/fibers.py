# fibers.py
"""Fibers, heights and fold classification.

H = W + <phi> with W = ker phi*. A fiber over an anchor z in W is the curve
t -> u(t) = w(t) + t phi solving Pi_W F(u(t)) = z; its height is
h(t) = <phi*, F(u(t))>, and the shape of h classifies F.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq

from app.src.errors import (
    BadNormalization,
    NoConvergence,
    NotAContraction,
    SingularMatrix,
    SpecInvalid,
    WindowTooNarrow,
)
from app.src.nonlinear import NemitskiiMap, NonlinearMap
from app.src.operators import ModelOperator, RFormProblem
from app.src.spectral import (
    SpectralTriple,
    balanced_norm,
    balancing_weights,
    count_above_one,
    dominant_eigenpair,
    inverse,
    linear_solve,
)

logger = logging.getLogger(__name__)

Form = Literal["m_form", "r_form"]


@dataclass(frozen=True)
class SplitSpace:
    phi: np.ndarray
    phi_star: np.ndarray

    def project_W(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u - float(self.phi_star @ u) * self.phi

    def height(self, u) -> float:
        return float(self.phi_star @ np.asarray(u, dtype=float))

    def lift(self, w, t: float) -> np.ndarray:
        return np.asarray(w, dtype=float) + t * self.phi

    @property
    def projector(self) -> np.ndarray:
        return np.eye(self.phi.shape[0]) - np.outer(self.phi, self.phi_star)


def build_split(triple: SpectralTriple) -> SplitSpace:
    phi = triple.phi_vector
    phi_star = triple.phi_star_vector
    pairing = float(phi_star @ phi)
    if pairing <= 1e-12:
        raise BadNormalization(f"<phi*, phi> = {pairing:.3e} is not positive")
    return SplitSpace(phi=phi, phi_star=phi_star / pairing)


# ---------------------------
# Problems
# ---------------------------

class FoldProblem:
    """F = L - P (m-form, self-adjoint L) or F = I - P(T .) (r-form).

    In m-form the pair (L, P) is recentred as (L - gamma I, P - gamma I); F itself
    is unchanged, and the slice map y -> Pi P_hat(L_W^-1 y + t phi) + z contracts
    with constant c = b_hat * ||L_hat_W^-1||. Both norms are taken in the
    balanced weighting, where Pi_W is an orthogonal projector.
    """

    def __init__(
        self,
        form: Form,
        linear: Union[ModelOperator, RFormProblem],
        P: NonlinearMap,
        gamma_center: Optional[float] = None,
    ):
        if P.dim != linear.dim:
            raise SpecInvalid(f"map dimension {P.dim} differs from operator dimension {linear.dim}")
        self.form = form
        self.linear = linear
        self.P = P
        self.split = build_split(linear.triple)
        self.dim = linear.dim
        phi, phi_star = self.split.phi, self.split.phi_star
        self._projector = self.split.projector
        self._rank_one = np.outer(phi, phi_star)
        self._weights = balancing_weights(phi, phi_star)

        if form == "m_form":
            if not isinstance(linear, ModelOperator) or not linear.self_adjoint:
                raise SpecInvalid("m-form problems need a self-adjoint model operator")
            self.operator = linear.L.entries
            self.gamma_center = P.default_center(phi, phi_star) if gamma_center is None else float(gamma_center)
            self.lambda_hat = linear.lambda_m - self.gamma_center
            shifted = self.operator - self.gamma_center * np.eye(self.dim)
            self.b_hat = P.slice_bound(self.gamma_center, phi, phi_star)
            try:
                self._slice_inverse = inverse(shifted + (1.0 - self.lambda_hat) * self._rank_one)
                inverse_norm = balanced_norm(self._slice_inverse @ self._projector, self._weights)
            except SingularMatrix:
                self._slice_inverse = None
                inverse_norm = math.inf
            self.mu_hat = 1.0 / inverse_norm if inverse_norm > 0 else math.inf
            self.contraction = self.b_hat * inverse_norm
        elif form == "r_form":
            if not isinstance(linear, RFormProblem):
                raise SpecInvalid("r-form problems need an RFormProblem")
            self.operator = linear.T.entries
            self.gamma_center = 0.0
            self.lambda_hat = 1.0
            self.b_hat = P.slice_bound(0.0, phi, phi_star)
            self.mu_hat = math.nan
            self._slice_inverse = None
            self.contraction = self.b_hat * balanced_norm(self._projector @ self.operator @ self._projector, self._weights)
        else:
            raise SpecInvalid(f"unknown form {form}")
        logger.debug("FoldProblem %s: gamma=%.6g, c=%.4g.", form, self.gamma_center, self.contraction)

    # ---- evaluation

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.form == "m_form":
            return self.operator @ u - self.P(u)
        return u - self.P(self.operator @ u)

    def __call__(self, u) -> np.ndarray:
        return self.evaluate(u)

    def jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.form == "m_form":
            return self.operator - self.P.jacobian(u)
        return np.eye(self.dim) - self.P.jacobian(self.operator @ u) @ self.operator

    def height(self, u) -> float:
        return self.split.height(self.evaluate(u))

    def lambda_from_jacobian(self, DF: np.ndarray) -> float:
        """Signed distance of the critical spectral value from its threshold."""
        if self.form == "m_form":
            return float(np.linalg.eigvalsh(0.5 * (DF + DF.T))[0])
        K = np.eye(self.dim) - DF
        if not np.any(K):
            return 1.0
        rho, _ = dominant_eigenpair(K)
        return 1.0 - rho

    def lambda_value(self, u) -> float:
        return self.lambda_from_jacobian(self.jacobian(u))

    def parity_count(self, u) -> int:
        DF = self.jacobian(u)
        if self.form == "m_form":
            return int(np.sum(np.linalg.eigvalsh(0.5 * (DF + DF.T)) < 0.0))
        K = np.eye(self.dim) - DF
        return count_above_one(K) if np.any(K) else 0

    def tangent_slope(self, u, DF: Optional[np.ndarray] = None) -> float:
        """h'(t) along the fiber through u, from Pi DF u' = 0 with u' = w' + phi."""
        if DF is None:
            DF = self.jacobian(u)
        phi = self.split.phi
        N = self._projector @ DF @ self._projector + self._rank_one
        w_dot = self.split.project_W(linear_solve(N, -(self._projector @ (DF @ phi))))
        return self.split.height(DF @ (w_dot + phi))

    def slice_residual(self, w, t: float, z) -> float:
        return float(np.linalg.norm(self.split.project_W(self.evaluate(self.split.lift(w, t))) - z))

    def describe(self) -> dict:
        return {
            "form": self.form,
            "dim": self.dim,
            "map": self.P.kind,
            "gamma_center": self.gamma_center,
            "b_hat": self.b_hat,
            "mu_hat": self.mu_hat,
            "contraction": self.contraction,
        }


def build_fold_problem(
    linear: Union[ModelOperator, RFormProblem],
    P: NonlinearMap,
    gamma_center: Optional[float] = None,
) -> FoldProblem:
    form: Form = "r_form" if isinstance(linear, RFormProblem) else "m_form"
    return FoldProblem(form, linear, P, gamma_center)


# ---------------------------
# Slices
# ---------------------------

@dataclass
class SliceSolution:
    w: np.ndarray
    iterations: int
    observed_ratio: float
    residual: float


def _newton_on_slice(prob: FoldProblem, z, t, w, tol, max_steps, strict):
    """Newton on w -> Pi F(w + t phi) - z restricted to W, with backtracking."""
    split = prob.split
    residual_vec = split.project_W(prob.evaluate(split.lift(w, t))) - z
    res = float(np.linalg.norm(residual_vec))
    steps = 0
    for steps in range(1, max_steps + 1):
        if res <= tol:
            break
        u = split.lift(w, t)
        DF = prob.jacobian(u)
        N = prob._projector @ DF @ prob._projector + prob._rank_one
        try:
            delta = split.project_W(linear_solve(N, -residual_vec))
        except SingularMatrix:
            break
        scale = 1.0
        improved = False
        for _ in range(30):
            w_try = w + scale * delta
            vec_try = split.project_W(prob.evaluate(split.lift(w_try, t))) - z
            res_try = float(np.linalg.norm(vec_try))
            if res_try < res:
                w, residual_vec, res = w_try, vec_try, res_try
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    if strict:
        floor = 1e-13 * prob.dim * (1.0 + float(np.linalg.norm(w)) + abs(t) + float(np.linalg.norm(z)))
        if res > max(tol, floor * 1e3):
            raise NoConvergence("slice Newton stalled", iterations=steps, residual=res, t=t)
    return w, res, steps


def invert_slice(
    prob: FoldProblem,
    z,
    t: float,
    w0=None,
    tol: float = 1e-9,
    max_iter: int = 1000,
) -> SliceSolution:
    """Solve Pi_W F(w + t phi) = z for w in W."""
    split = prob.split
    z = np.asarray(z, dtype=float)
    w = np.zeros(prob.dim) if w0 is None else split.project_W(w0)
    observed = 0.0
    prev_step = None
    iterations = 0

    if prob.form == "m_form":
        if prob.contraction >= 1.0 or prob._slice_inverse is None:
            raise NotAContraction(f"slice map constant c = {prob.contraction:.4g} is not below 1")
        S = prob._slice_inverse
        gamma = prob.gamma_center
        shifted_w = prob.operator @ w - gamma * w
        y = split.project_W(shifted_w)
        for iterations in range(1, max_iter + 1):
            w = S @ y
            u = split.lift(w, t)
            y_next = split.project_W(prob.P(u) - gamma * u) + z
            step = float(np.linalg.norm(y_next - y))
            if prev_step is not None and prev_step > 1e-10 * (1.0 + float(np.linalg.norm(y))):
                observed = max(observed, step / prev_step)
            y, prev_step = y_next, step
            if step <= tol:
                break
        else:
            raise NoConvergence("slice fixed point hit the iteration cap", iterations=max_iter, residual=prev_step, t=t)
        w = split.project_W(S @ y)
        w, res, _ = _newton_on_slice(prob, z, t, w, tol * 1e-3, 3, strict=False)
    else:
        T = prob.operator
        for iterations in range(1, 26):
            w_next = split.project_W(prob.P(T @ split.lift(w, t))) + z
            step = float(np.linalg.norm(w_next - w))
            if prev_step is not None and step >= prev_step:
                break
            if prev_step is not None and prev_step > 1e-10 * (1.0 + float(np.linalg.norm(w))):
                observed = max(observed, step / prev_step)
            w, prev_step = w_next, step
            if step <= tol:
                break
        w, res, steps = _newton_on_slice(prob, z, t, w, tol, 60, strict=True)
        iterations += steps

    logger.debug("slice t=%.6g: %d iterations, ratio %.3g, residual %.2e.", t, iterations, observed, res)
    return SliceSolution(w=w, iterations=iterations, observed_ratio=observed, residual=res)


# ---------------------------
# Fibers
# ---------------------------

@dataclass
class Fiber:
    problem: FoldProblem = field(repr=False)
    z: np.ndarray
    t_samples: np.ndarray
    w_samples: np.ndarray
    h_samples: np.ndarray
    lambda_samples: np.ndarray
    slope_samples: np.ndarray
    residuals: np.ndarray
    ratios: np.ndarray
    slice_tol: float = 1e-9

    @property
    def nt(self) -> int:
        return int(self.t_samples.shape[0])

    @property
    def u_samples(self) -> np.ndarray:
        return self.w_samples + np.outer(self.t_samples, self.problem.split.phi)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    def nearest_w(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.t_samples - t)))
        return self.w_samples[k]

    def rows(self):
        for k in range(self.nt):
            yield [self.t_samples[k], self.h_samples[k], self.lambda_samples[k], self.residuals[k], *self.w_samples[k]]

    def header(self) -> list[str]:
        return ["t", "h", "lambda", "residual"] + [f"w_{i}" for i in range(self.problem.dim)]


def _check_anchor(prob: FoldProblem, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if abs(prob.split.height(z)) > 1e-8 * (1.0 + float(np.linalg.norm(z))):
        raise ValueError(f"anchor is not in W (height {prob.split.height(z):.3e})")
    return prob.split.project_W(z)


def trace_fiber(
    prob: FoldProblem,
    z,
    t_min: float,
    t_max: float,
    nt: int = 512,
    tol: float = 1e-9,
) -> Fiber:
    if not t_min < t_max:
        raise ValueError("need t_min < t_max")
    if nt < 3:
        raise ValueError("need at least 3 samples")
    z = _check_anchor(prob, z)
    ts = np.linspace(t_min, t_max, nt)
    ws = np.zeros((nt, prob.dim))
    hs, lams, slopes, residuals, ratios = (np.zeros(nt) for _ in range(5))

    w = np.zeros(prob.dim)
    for k, t in enumerate(ts):
        sol = invert_slice(prob, z, float(t), w, tol)
        w = sol.w
        u = prob.split.lift(w, float(t))
        DF = prob.jacobian(u)
        ws[k] = w
        hs[k] = prob.height(u)
        lams[k] = prob.lambda_from_jacobian(DF)
        slopes[k] = prob.tangent_slope(u, DF)
        residuals[k] = sol.residual
        ratios[k] = sol.observed_ratio

    logger.info("Traced %d samples on [%g, %g]; max slice ratio %.3g.", nt, t_min, t_max, float(np.max(ratios)))
    return Fiber(prob, z, ts, ws, hs, lams, slopes, residuals, ratios, slice_tol=tol)


# ---------------------------
# Classification
# ---------------------------

Verdict = Literal["homeomorphism", "fold_down", "fold_up", "non_simple", "inconclusive"]


class FoldClassification(BaseModel):
    verdict: Verdict
    sign_changes: int
    left_slope: float
    right_slope: float
    critical_t: list[float]
    window_adequate: bool
    handr_mismatches: int
    note: str = ""


def _end_slopes(t: np.ndarray, h: np.ndarray, count: int) -> tuple[float, float]:
    left = float(np.polyfit(t[:count], h[:count], 1)[0])
    right = float(np.polyfit(t[-count:], h[-count:], 1)[0])
    return left, right


def _slopes_agree(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b)) + 1e-9


def classify_fold(
    fiber: Fiber,
    slope_window: float = 0.2,
    slope_rtol: float = 0.05,
    lambda_tol: float = 1e-8,
) -> FoldClassification:
    if fiber.nt < 32:
        raise ValueError("classification needs at least 32 samples")
    t, h, lam = fiber.t_samples, fiber.h_samples, fiber.lambda_samples

    dh = np.diff(h)
    flat = 1e-12 * (1.0 + float(np.max(np.abs(h))))
    signs = np.where(np.abs(dh) <= flat, 0, np.sign(dh)).astype(int)
    nonzero = signs[signs != 0]
    changes = int(np.sum(nonzero[1:] != nonzero[:-1])) if nonzero.size else 0

    count = max(2, int(round(slope_window * fiber.nt)))
    left, right = _end_slopes(t, h, count)
    half = max(2, count // 2)
    inner_left, inner_right = _end_slopes(t, h, half)
    adequate = _slopes_agree(left, inner_left, slope_rtol) and _slopes_agree(right, inner_right, slope_rtol)

    lam_signs = np.where(np.abs(lam) <= lambda_tol, 0, np.sign(lam))
    critical = []
    for k in range(fiber.nt - 1):
        if lam_signs[k] * lam_signs[k + 1] < 0:
            critical.append(float(t[k] - lam[k] * (t[k + 1] - t[k]) / (lam[k + 1] - lam[k])))

    slope_signs = np.sign(fiber.slope_samples)
    checked = (np.abs(lam) > lambda_tol) & (np.abs(fiber.slope_samples) > lambda_tol)
    mismatches = int(np.sum(checked[1:-1] & (slope_signs[1:-1] != lam_signs[1:-1])))

    verdict: Verdict = "inconclusive"
    note = ""
    if mismatches:
        note = f"h' and lambda disagree in sign at {mismatches} samples"
    elif nonzero.size == 0:
        note = "height is flat on the window"
    elif changes == 0:
        if left * right > 0 and np.sign(left) == nonzero[0]:
            verdict = "homeomorphism"
        else:
            note = "monotone samples but end slopes do not share its sign"
    elif changes == 1:
        if nonzero[0] > 0 and left > 0 > right:
            verdict = "fold_down"
        elif nonzero[0] < 0 and left < 0 < right:
            verdict = "fold_up"
        else:
            note = "one extremum but end slopes fit no fold"
    else:
        verdict = "non_simple"
    if not adequate:
        note = (note + "; " if note else "") + "end slopes not stabilized on the window"

    logger.info("Classified fiber: %s (%d sign changes, slopes %.4g / %.4g).", verdict, changes, left, right)
    return FoldClassification(
        verdict=verdict,
        sign_changes=changes,
        left_slope=left,
        right_slope=right,
        critical_t=critical,
        window_adequate=adequate,
        handr_mismatches=mismatches,
        note=note,
    )


# ---------------------------
# Critical points
# ---------------------------

@dataclass
class CriticalSample:
    t: float
    u: np.ndarray
    lambda_value: float
    height: float


def _evaluate_at(fiber: Fiber, t: float) -> tuple[np.ndarray, float, float]:
    prob = fiber.problem
    sol = invert_slice(prob, fiber.z, t, fiber.nearest_w(t), fiber.slice_tol)
    u = prob.split.lift(sol.w, t)
    return u, prob.lambda_value(u), prob.height(u)


def critical_points_on_fiber(fiber: Fiber, refine_tol: float = 1e-8) -> list[CriticalSample]:
    """Refine every sign change of lambda(t) on the fiber; endpoints are excluded.

    Samples with |lambda| <= refine_tol are skipped when bracketing, so the
    bracket always runs between the nearest samples of opposite sign.
    """
    t, lam = fiber.t_samples, fiber.lambda_samples
    signs = np.where(np.abs(lam) <= refine_tol, 0, np.sign(lam))
    marked = [k for k in range(fiber.nt) if signs[k] != 0]
    found = []
    for i, j in zip(marked[:-1], marked[1:]):
        if signs[i] * signs[j] > 0:
            continue
        try:
            t_c = float(brentq(lambda s: _evaluate_at(fiber, s)[1], t[i], t[j], xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200))
        except (ValueError, RuntimeError) as e:
            raise NoConvergence(f"critical point on [{t[i]:.6g}, {t[j]:.6g}] not refined: {e}", t=float(t[i])) from e
        u, lam_c, h_c = _evaluate_at(fiber, t_c)
        if abs(lam_c) > refine_tol:
            logger.warning("Critical point at t=%.6g keeps lambda = %.3e above %.1e.", t_c, lam_c, refine_tol)
        found.append(CriticalSample(t=t_c, u=u, lambda_value=lam_c, height=h_c))
    if found:
        logger.info("Found %d critical point(s) on the fiber.", len(found))
    return found


# ---------------------------
# Preimages
# ---------------------------

class SolveSolution(BaseModel):
    t: float
    u: list[float]
    residual: float
    index: int
    lambda_value: float
    tangent: bool = False


class PairOrdering(BaseModel):
    i: int
    j: int
    relation: Literal["greater", "less", "equal", "unordered"]
    min_gap: float


class SolveReport(BaseModel):
    target: list[float]
    anchor: list[float]
    target_height: float
    window: tuple[float, float]
    verdict: Verdict
    window_adequate: bool
    solutions: list[SolveSolution]
    count: int
    ordering: list[PairOrdering]


def componentwise_relation(u, v, tol: float = 1e-9) -> PairOrdering:
    diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    gap = float(np.min(np.abs(diff)))
    if float(np.max(np.abs(diff))) <= tol:
        relation = "equal"
    elif np.all(diff > 0):
        relation = "greater"
    elif np.all(diff < 0):
        relation = "less"
    else:
        relation = "unordered"
    return PairOrdering(i=0, j=0, relation=relation, min_gap=gap)


def _newton_full(prob: FoldProblem, g: np.ndarray, u: np.ndarray, tol: float, max_iter: int = 50):
    res = float(np.linalg.norm(prob.evaluate(u) - g))
    for _ in range(max_iter):
        if res <= 1e-3 * tol:
            break
        try:
            delta = linear_solve(prob.jacobian(u), g - prob.evaluate(u))
        except SingularMatrix:
            break
        u_next = u + delta
        res_next = float(np.linalg.norm(prob.evaluate(u_next) - g))
        if res_next >= res:
            break
        u, res = u_next, res_next
    return u, res


def _index_of(prob: FoldProblem, u: np.ndarray, tol: float) -> tuple[int, float]:
    lam = prob.lambda_value(u)
    if abs(lam) <= tol:
        return 0, lam
    return (1 if prob.parity_count(u) % 2 == 0 else -1), lam


def solve_preimages(
    prob: FoldProblem,
    g,
    window: tuple[float, float] = (-50.0, 50.0),
    nt: int = 512,
    tol: float = 1e-8,
    slice_tol: float = 1e-9,
    refine_tol: float = 1e-8,
    require_stable_window: bool = True,
) -> SolveReport:
    """All preimages of g on the fiber over Pi_W g within the t window."""
    g = np.asarray(g, dtype=float)
    split = prob.split
    z = split.project_W(g)
    h_star = split.height(g)
    fiber = trace_fiber(prob, z, window[0], window[1], nt, slice_tol)
    classification = classify_fold(fiber)
    if require_stable_window and not classification.window_adequate:
        raise WindowTooNarrow(
            f"end slopes on [{window[0]}, {window[1]}] did not stabilize "
            f"(left {classification.left_slope:.4g}, right {classification.right_slope:.4g})"
        )

    t = fiber.t_samples
    d = fiber.h_samples - h_star

    def height_root(lo: float, hi: float) -> float:
        return float(brentq(lambda s: _evaluate_at(fiber, s)[2] - h_star, lo, hi, xtol=1e-12, maxiter=200))

    candidates: list[tuple[float, bool]] = []
    for k in range(fiber.nt):
        if d[k] == 0.0:
            candidates.append((float(t[k]), False))
        elif k + 1 < fiber.nt and d[k] * d[k + 1] < 0:
            candidates.append((height_root(t[k], t[k + 1]), False))

    # an extremum between two samples can cross h* twice with no sign change at the samples
    tangency_tol = 100.0 * tol * (1.0 + abs(h_star))
    for crit in critical_points_on_fiber(fiber, refine_tol):
        d_c = crit.height - h_star
        if abs(d_c) <= tangency_tol:
            candidates.append((crit.t, True))
            continue
        k = int(np.searchsorted(t, crit.t)) - 1
        if k < 0 or k + 1 >= fiber.nt or not t[k] < crit.t < t[k + 1]:
            continue
        if d[k] * d_c < 0 and d[k + 1] * d_c < 0:
            candidates.append((height_root(t[k], crit.t), False))
            candidates.append((height_root(crit.t, t[k + 1]), False))

    candidates.sort()
    merge_gap = 10.0 * math.sqrt(tol)
    clusters: list[list[tuple[float, bool]]] = []
    for cand in candidates:
        if clusters and cand[0] - clusters[-1][-1][0] < merge_gap:
            clusters[-1].append(cand)
        else:
            clusters.append([cand])

    solutions = []
    for cluster in clusters:
        tangent = any(flag for _, flag in cluster)
        t_root = next((tc for tc, flag in cluster if flag), cluster[0][0])
        u0, _, _ = _evaluate_at(fiber, t_root)
        if tangent:
            u, res = u0, float(np.linalg.norm(prob.evaluate(u0) - g))
            index, lam = 0, prob.lambda_value(u)
        else:
            u, res = _newton_full(prob, g, u0, tol)
            index, lam = _index_of(prob, u, refine_tol)
        if res > tol:
            logger.warning("Preimage near t=%.6g has residual %.3e above %.1e.", t_root, res, tol)
        solutions.append(
            SolveSolution(t=split.height(u), u=u.tolist(), residual=res, index=index, lambda_value=lam, tangent=tangent)
        )

    ordering = []
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            rel = componentwise_relation(solutions[i].u, solutions[j].u)
            ordering.append(rel.model_copy(update={"i": i, "j": j}))

    logger.info("Target height %.6g: %d preimage(s).", h_star, len(solutions))
    return SolveReport(
        target=g.tolist(),
        anchor=z.tolist(),
        target_height=h_star,
        window=(float(window[0]), float(window[1])),
        verdict=classification.verdict,
        window_adequate=classification.window_adequate,
        solutions=solutions,
        count=len(solutions),
        ordering=ordering,
    )


# ---------------------------
# Properness and the homeomorphism criterion
# ---------------------------

def vertical_height(prob: FoldProblem, t: float) -> float:
    """h_v(t) = <phi*, F(t phi)>."""
    return prob.height(t * prob.split.phi)


def properness_slopes(prob: FoldProblem, t_far: float = 1e4) -> tuple[float, float]:
    """Asymptotic slopes of h_v at -inf and +inf, by secants far out on the vertical line."""
    left = (vertical_height(prob, -t_far) - vertical_height(prob, -2.0 * t_far)) / t_far
    right = (vertical_height(prob, 2.0 * t_far) - vertical_height(prob, t_far)) / t_far
    return float(left), float(right)


def dolph_hammerstein(prob: FoldProblem) -> bool:
    """True when f' ranges strictly inside (lambda_m, mu_m), which makes F a homeomorphism."""
    if prob.form != "m_form" or not isinstance(prob.P, NemitskiiMap):
        return False
    model = prob.linear
    profile = prob.P.profile
    return model.lambda_m < profile.a and profile.b < model.mu_m
