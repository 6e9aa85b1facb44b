import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.src.errors import CriticalPoint, DimensionTooLarge, SpecInvalid, SupplierMissing
from app.src.fibers import build_fold_problem, critical_points_on_fiber
from app.src.nonlinear import make_convex_profile, nemitskii, nonlocal_map, zero_map
from app.src.operators import ProblemSpec, build_model_operator, model_from_matrix, to_r_form
from app.src.spectral import linear_solve
from app.src.verify import (
    brute_force_oracle,
    check_critical_lines,
    check_handr,
    check_m_hypotheses,
    check_r_hypotheses,
    count_above_one,
    gamma_threshold,
    index_at,
)
from tests.conftest import LAPLACE3_EIGENVALUES

LAMBDA_M, MU_M = LAPLACE3_EIGENVALUES[0], LAPLACE3_EIGENVALUES[1]


@pytest.fixture(scope="module")
def bnv():
    """Advection-diffusion operator in r-form with the rescaled convex profile."""
    model = build_model_operator(ProblemSpec(kind="nondivergence_1d", n=31, diffusion=1.0, drift=5.0))
    gamma = 50.0
    profile = make_convex_profile(10.0, 22.0).shifted(model.lambda_m).rescaled(gamma)
    return build_fold_problem(to_r_form(model, gamma), nemitskii(profile, model.dim))


# ---- m-form hypotheses

def test_m_hypotheses_pass_for_centred_profile(ap3):
    report = check_m_hypotheses(ap3, n_samples=500, seed=0)
    assert report.passed and report.violations == []
    assert report.margins["m-H"] == pytest.approx(MU_M - 10.0 - 5.0, rel=1e-9)
    assert report.margins["m-H"] == pytest.approx(17.0, rel=1e-9)
    assert "no violation found in 500 samples" == report.summary


def test_m_hypotheses_report_norm_violations(laplace3):
    prob = build_fold_problem(laplace3, nemitskii(make_convex_profile(5.0, 60.0), 3))
    report = check_m_hypotheses(prob, n_samples=50, seed=1)
    assert not report.passed
    assert any(v.check == "m-H" for v in report.violations)
    assert [v.sample for v in report.violations] == sorted(v.sample for v in report.violations)


def test_zero_map_violates_strict_convexity(linear3):
    report = check_m_hypotheses(linear3, n_samples=20, seed=2)
    assert {v.check for v in report.violations} == {"m-Conv"}


def test_nonlocal_map_passes(laplace3):
    A = np.eye(3) + 0.1 * (np.eye(3, k=1) + np.eye(3, k=-1))
    prob = build_fold_problem(laplace3, nonlocal_map(A, np.ones(3), make_convex_profile(3.0, 12.0)))
    assert check_m_hypotheses(prob, n_samples=100, seed=3).passed


def test_m_hypotheses_need_m_form(bnv):
    with pytest.raises(SpecInvalid):
        check_m_hypotheses(bnv)


# ---- r-form hypotheses

def test_r_hypotheses_pass_above_threshold(bnv):
    model = bnv.linear.source
    assert 50.0 > gamma_threshold(model.lambda_m, model.mu_m, 22.0)
    report = check_r_hypotheses(bnv, n_samples=200, seed=0)
    assert report.passed, report.violations[:3]
    assert report.margins["r-H"] > 0


def test_r_hypotheses_flag_tight_bound(bnv):
    report = check_r_hypotheses(bnv, n_samples=50, seed=0, b=0.01)
    assert not report.passed
    assert any(v.check == "r-H" and "exceeds b" in v.detail for v in report.violations)


def test_r_hypotheses_report_small_gamma(laplace3):
    gamma = 2.0
    profile = make_convex_profile(1.0, 15.0).shifted(LAMBDA_M).rescaled(gamma)
    assert profile.a < 0
    prob = build_fold_problem(to_r_form(laplace3, gamma), nemitskii(profile, 3))
    report = check_r_hypotheses(prob, n_samples=30, seed=0)
    assert not report.passed
    assert any(v.check == "r-slopes" for v in report.violations)
    assert any(v.check == "eigenvalues-above-one" for v in report.violations)


def test_r_hypotheses_need_supplier(laplace3):
    A = np.eye(3)
    prob = build_fold_problem(to_r_form(laplace3, 5.0), nonlocal_map(A, np.ones(3), make_convex_profile(0.5, 1.5)))
    with pytest.raises(SupplierMissing):
        check_r_hypotheses(prob)


def test_at_most_one_eigenvalue_above_one(laplace3):
    gamma = 40.0
    prob = build_fold_problem(to_r_form(laplace3, gamma), nemitskii(make_convex_profile(5.0, 15.0).shifted(LAMBDA_M).rescaled(gamma), 3))
    T = prob.operator
    rng = np.random.default_rng(5)
    for _ in range(200):
        K = prob.P.linearize(3.0 * rng.standard_normal(3), 3.0 * rng.standard_normal(3)) @ T
        exact = int(np.sum(np.real(np.linalg.eigvals(K)) > 1.0))
        assert exact <= 1
        assert count_above_one(K) == exact


def test_gamma_threshold():
    assert gamma_threshold(10.0, 40.0, 15.0) == pytest.approx(5.0 * 30.0 / 25.0)
    assert gamma_threshold(10.0, 40.0, 8.0) == 0.0
    assert gamma_threshold(10.0, 40.0, 45.0) == float("inf")


# ---- index

def test_index_of_linear_map_is_positive(linear3):
    rng = np.random.default_rng(0)
    for _ in range(10):
        report = index_at(linear3, rng.standard_normal(3))
        assert report.index == 1 and report.parity_count == 0 and report.consistent


def test_index_flips_once_along_fold_fiber(ap3, ap3_fiber):
    t_c = critical_points_on_fiber(ap3_fiber)[0].t
    indices = []
    for t, u, lam in zip(ap3_fiber.t_samples, ap3_fiber.u_samples, ap3_fiber.lambda_samples):
        if abs(lam) <= 1e-6:
            continue
        report = index_at(ap3, u)
        assert report.consistent
        indices.append(report.index)
        assert report.index == (1 if t < t_c else -1)
    assert int(np.sum(np.diff(indices) != 0)) == 1


def test_index_sign_parity_consistency(ap3, bnv):
    rng = np.random.default_rng(9)
    for prob, scale in ((ap3, 3.0), (bnv, 30.0)):
        for _ in range(100):
            u = scale * rng.standard_normal(prob.dim)
            try:
                assert index_at(prob, u).consistent
            except CriticalPoint:
                pass


def test_index_at_critical_point_raises(ap3, ap3_fiber):
    critical = critical_points_on_fiber(ap3_fiber)[0]
    with pytest.raises(CriticalPoint):
        index_at(ap3, critical.u, tol=1e-4)


# ---- handr and critical lines

def test_handr_identity_on_fold_fiber(ap3_fiber):
    report = check_handr(ap3_fiber)
    assert report.passed and report.samples > 200


def test_critical_lines_exist_on_fold(ap3):
    report = check_critical_lines(ap3, n_anchors=10, seed=4, window=(-60.0, 60.0), nt=128, scale=3.0)
    assert report.passed
    assert all(c == 1 for c in report.counts)


def test_critical_lines_absent_for_linear_map(linear3):
    report = check_critical_lines(linear3, n_anchors=3, window=(-10.0, 10.0), nt=32)
    assert not report.passed
    assert report.summary.startswith("no critical point found")


# ---- oracle

def test_oracle_linear_toy():
    model = model_from_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    prob = build_fold_problem(model, zero_map(2))
    g = np.array([1.0, 0.5])
    report = brute_force_oracle(prob, g, box=[(-5.0, 5.0)] * 2, grid_per_axis=3, window=(-10.0, 10.0), nt=64)
    assert report.match
    assert len(report.oracle_solutions) == 1
    np.testing.assert_allclose(report.oracle_solutions[0], linear_solve(model.L, g), atol=1e-10)


def test_oracle_matches_engine_on_fold(ap3, ap3_fiber):
    peak = critical_points_on_fiber(ap3_fiber)[0].height
    rng = np.random.default_rng(21)
    targets = [(peak - 2.0) * ap3.split.phi, (peak + 2.0) * ap3.split.phi]
    targets += [ap3(3.0 * rng.standard_normal(3)) for _ in range(4)]
    for g in targets:
        report = brute_force_oracle(ap3, g, window=(-60.0, 60.0), nt=256)
        assert report.match, (report.oracle_solutions, report.engine_solutions)
    assert len(brute_force_oracle(ap3, targets[0], window=(-60.0, 60.0), nt=256).oracle_solutions) == 2
    assert brute_force_oracle(ap3, targets[1], window=(-60.0, 60.0), nt=256).oracle_solutions == []


def test_oracle_refuses_large_dimension():
    model = build_model_operator(ProblemSpec(kind="dirichlet_laplacian_1d", n=4))
    prob = build_fold_problem(model, zero_map(4))
    with pytest.raises(DimensionTooLarge):
        brute_force_oracle(prob, np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-8.0, 8.0)))
def test_index_matches_lambda_sign(u):
    gamma = 10.0
    model = build_model_operator(ProblemSpec(kind="dirichlet_laplacian_1d", n=3))
    prob = build_fold_problem(model, nemitskii(make_convex_profile(5.0, 15.0), 3), gamma)
    assume(abs(prob.lambda_value(u)) > 1e-6)
    report = index_at(prob, u)
    assert report.consistent
    assert report.parity_count in (0, 1)
