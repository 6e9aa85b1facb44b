# scenario_service.py
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from pydantic import BaseModel

from app.src.errors import ConfigValidationError, DimensionTooLarge, SpecInvalid
from app.src.fibers import (
    Fiber,
    FoldClassification,
    FoldProblem,
    SolveReport,
    build_fold_problem,
    classify_fold,
    critical_points_on_fiber,
    dolph_hammerstein,
    properness_slopes,
    solve_preimages,
    trace_fiber,
)
from app.src.nonlinear import (
    NonlinearMap,
    make_convex_profile,
    nemitskii,
    nonlocal_map,
    vertical_sine_map,
    zero_map,
)
from app.src.operators import ModelOperator, MSpecialReport, build_model_operator, to_r_form, verify_m_special
from app.src.scenario_config import ScenarioConfig
from app.src.verify import (
    HypothesisReport,
    OracleReport,
    Violation,
    brute_force_oracle,
    check_handr,
    check_m_hypotheses,
    check_r_hypotheses,
    index_at,
)

logger = logging.getLogger(__name__)


# ---- models

class SpectrumReport(BaseModel):
    kind: str
    dim: int
    lambda_m: float
    mu_m: float
    phi: list[float]
    phi_star: list[float]
    self_adjoint: bool
    form: str
    r_form_gamma: Optional[float] = None
    r_form_second_modulus: Optional[float] = None
    m_special: MSpecialReport
    problem: dict
    properness_slopes: tuple[float, float]
    dolph_hammerstein: bool


class VerifyReport(BaseModel):
    hypotheses: Optional[HypothesisReport] = None
    handr: HypothesisReport
    degree: Optional[HypothesisReport] = None
    oracle: list[OracleReport] = []
    passed: bool


class ScenarioService:
    """Builds the operator, the map and the fold problem of one scenario, and runs its pipelines."""

    def __init__(self, config: ScenarioConfig, jobs: int = 1):
        self.config = config
        self.jobs = max(1, jobs)
        self.model: ModelOperator = build_model_operator(config.operator)
        self.problem: FoldProblem = self._build_problem()
        self._fiber: Optional[Fiber] = None
        logger.info("Scenario %s ready: %s.", config.name, self.problem.describe())

    # ---- construction

    def _build_map(self) -> NonlinearMap:
        spec = self.config.nonlinearity
        dim = self.model.dim
        triple = self.model.triple
        if spec.kind == "zero":
            return zero_map(dim)
        if spec.kind == "vertical_sine":
            return vertical_sine_map(triple.phi_vector, triple.phi_star_vector, self.model.lambda_m)
        profile = make_convex_profile(spec.a, spec.b, spec.kappa)
        if spec.kind == "nonlocal":
            A = self.config.nonlocal_matrix()
            return nonlocal_map(A, self.config.nonlocal_weight(A.shape[0]), profile)
        return nemitskii(profile, dim)

    def _build_problem(self) -> FoldProblem:
        form = self.config.form
        P = self._build_map()
        if form.kind == "m_form":
            return build_fold_problem(self.model, P, form.gamma)
        # r-form: F(y) = y - P(Ty) with P = id + (f - lambda_m id) / gamma
        spec = self.config.nonlinearity
        linear = to_r_form(self.model, form.gamma)
        if spec.kind == "nemitskii":
            profile = make_convex_profile(spec.a, spec.b, spec.kappa).shifted(self.model.lambda_m).rescaled(form.gamma)
            return build_fold_problem(linear, nemitskii(profile, self.model.dim))
        if spec.kind == "zero":
            return build_fold_problem(linear, zero_map(self.model.dim))
        raise SpecInvalid(f"r_form scenarios support nemitskii and zero maps, not {spec.kind}")

    # ---- pipelines

    def anchor(self) -> np.ndarray:
        run = self.config.run
        if run.anchor is None:
            return np.zeros(self.problem.dim)
        if len(run.anchor) != self.problem.dim:
            raise ConfigValidationError([f"run.anchor: length {len(run.anchor)} does not match dimension {self.problem.dim}"])
        return self.problem.split.project_W(run.anchor)

    def spectrum(self) -> SpectrumReport:
        model = self.model
        mu_samples = [model.lambda_m - d for d in (0.5, 1.0, 10.0)]
        linear = self.problem.linear
        r_form = self.problem.form == "r_form"
        return SpectrumReport(
            kind=self.config.operator.kind,
            dim=model.dim,
            lambda_m=model.lambda_m,
            mu_m=model.mu_m,
            phi=model.triple.phi,
            phi_star=model.triple.phi_star,
            self_adjoint=model.self_adjoint,
            form=self.problem.form,
            r_form_gamma=linear.gamma if r_form else None,
            r_form_second_modulus=linear.triple.gap_value if r_form else None,
            m_special=verify_m_special(model, mu_samples),
            problem=self.problem.describe(),
            properness_slopes=properness_slopes(self.problem),
            dolph_hammerstein=dolph_hammerstein(self.problem),
        )

    def fiber(self) -> Fiber:
        if self._fiber is None:
            run = self.config.run
            self._fiber = trace_fiber(self.problem, self.anchor(), run.t_min, run.t_max, run.nt, run.slice_tol)
        return self._fiber

    def classify(self) -> FoldClassification:
        return classify_fold(self.fiber())

    def peak_height(self) -> float:
        """Extreme height on the anchor fiber: refined critical height if any, else the sampled maximum."""
        fiber = self.fiber()
        critical = critical_points_on_fiber(fiber, self.config.run.refine_tol)
        if critical:
            return max(c.height for c in critical)
        return float(np.max(fiber.h_samples))

    def targets(self) -> list[np.ndarray]:
        run = self.config.run
        phi = self.problem.split.phi
        targets = [np.asarray(g, dtype=float) for g in run.targets]
        if run.height_offsets:
            z = self.anchor()
            peak = self.peak_height()
            targets += [z + (peak + offset) * phi for offset in run.height_offsets]
        if run.random_targets:
            rng = np.random.default_rng(run.seed)
            targets += [run.target_scale * rng.standard_normal(self.problem.dim) for _ in range(run.random_targets)]
        for g in targets:
            if g.shape != (self.problem.dim,):
                raise SpecInvalid(f"target of shape {g.shape} for dimension {self.problem.dim}")
        return targets

    def _solve_one(self, g: np.ndarray) -> SolveReport:
        run = self.config.run
        return solve_preimages(
            self.problem,
            g,
            window=(run.t_min, run.t_max),
            nt=run.nt,
            tol=run.tol,
            slice_tol=run.slice_tol,
            refine_tol=run.refine_tol,
            require_stable_window=run.require_stable_window,
        )

    def solve(self, targets: Optional[list[np.ndarray]] = None) -> list[SolveReport]:
        if targets is None:
            targets = self.targets()
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(self._solve_one, targets))

    def degree_check(self) -> HypothesisReport:
        """Two-preimage targets g = F(u*): ordered pair, indices summing to zero."""
        run = self.config.run
        rng = np.random.default_rng(run.seed + 1)
        points = [run.target_scale * rng.standard_normal(self.problem.dim) for _ in range(run.degree_targets)]
        reports = self.solve([self.problem.evaluate(u) for u in points])
        violations = []
        for k, report in enumerate(reports):
            if report.count != 2:
                violations.append(Violation(sample=k, check="count", value=float(report.count), detail="expected two preimages"))
                continue
            pair = report.ordering[0]
            if pair.relation not in ("greater", "less") or pair.min_gap <= 0:
                violations.append(Violation(sample=k, check="trichotomy", value=pair.min_gap, detail=pair.relation))
            total = sum(s.index for s in report.solutions)
            if total != 0:
                violations.append(Violation(sample=k, check="degree", value=float(total), detail="indices do not cancel"))
        passed = not violations
        summary = f"{len(violations)} violation(s) in {len(reports)} targets" if violations else f"no violation found in {len(reports)} targets"
        return HypothesisReport(hypothesis="degree", samples=len(reports), violations=violations, margins={}, passed=passed, summary=summary)

    def hypotheses(self) -> HypothesisReport:
        run = self.config.run
        if self.problem.form == "m_form":
            return check_m_hypotheses(self.problem, run.samples, run.seed)
        return check_r_hypotheses(self.problem, n_samples=run.samples, seed=run.seed)

    def oracle(self, targets: list[np.ndarray], reports: list[SolveReport]) -> list[OracleReport]:
        run = self.config.run
        if self.problem.dim > 3:
            raise DimensionTooLarge(f"oracle requested at dimension {self.problem.dim}")
        box = [(-run.oracle_box, run.oracle_box)] * self.problem.dim
        return [
            brute_force_oracle(
                self.problem, g, box=box, grid_per_axis=run.oracle_grid, window=(run.t_min, run.t_max), engine=report
            )
            for g, report in zip(targets, reports)
        ]

    def verify(self) -> VerifyReport:
        run = self.config.run
        hypotheses = self.hypotheses() if run.require_hypotheses else None
        handr = check_handr(self.fiber(), run.refine_tol)
        degree = self.degree_check() if run.degree_targets else None
        oracle = []
        if run.oracle:
            targets = self.targets()
            oracle = self.oracle(targets, self.solve(targets))
        passed = (
            (hypotheses is None or hypotheses.passed)
            and handr.passed
            and (degree is None or degree.passed)
            and all(o.match for o in oracle)
        )
        return VerifyReport(hypotheses=hypotheses, handr=handr, degree=degree, oracle=oracle, passed=passed)

    def index_profile(self) -> list[int]:
        """Index at every regular fiber sample; 0 where lambda is within refine_tol."""
        fiber = self.fiber()
        out = []
        for k in range(fiber.nt):
            if abs(fiber.lambda_samples[k]) <= self.config.run.refine_tol:
                out.append(0)
            else:
                out.append(index_at(self.problem, fiber.u_samples[k], self.config.run.refine_tol).index)
        return out
