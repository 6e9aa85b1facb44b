import numpy as np
import pytest

from app.src.fibers import build_fold_problem
from app.src.nonlinear import make_convex_profile, nemitskii, vertical_sine_map, zero_map
from app.src.operators import ProblemSpec, build_model_operator

SQRT2 = np.sqrt(2.0)
# closed-form spectrum of the n = 3 Dirichlet Laplacian on (0, 1), h = 1/4
LAPLACE3_EIGENVALUES = np.array([16.0 * (2.0 - SQRT2), 32.0, 16.0 * (2.0 + SQRT2)])
LAPLACE3_GROUND = np.array([0.5, SQRT2 / 2.0, 0.5])


@pytest.fixture(scope="session")
def laplace3():
    return build_model_operator(ProblemSpec(kind="dirichlet_laplacian_1d", n=3))


@pytest.fixture(scope="session")
def ap3(laplace3):
    """Convex (5, 15, 1) Nemitskii on the n = 3 Laplacian, centred at gamma = 10."""
    return build_fold_problem(laplace3, nemitskii(make_convex_profile(5.0, 15.0, 1.0), 3), 10.0)


@pytest.fixture(scope="session")
def linear3(laplace3):
    return build_fold_problem(laplace3, zero_map(3))


@pytest.fixture(scope="session")
def sine3(laplace3):
    triple = laplace3.triple
    return build_fold_problem(laplace3, vertical_sine_map(triple.phi_vector, triple.phi_star_vector, laplace3.lambda_m))


@pytest.fixture(scope="session")
def ap3_fiber(ap3):
    from app.src.fibers import trace_fiber

    return trace_fiber(ap3, np.zeros(3), -60.0, 60.0, 256)
