# nonlinear.py
"""Nonlinear maps P with evaluation, Jacobian J(u) and two-point linearization G(u, v).

Every kind satisfies P(u) - P(v) = G(u, v)(u - v) with G(u, u) = J(u).
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from app.src.errors import BadNormalization, BadSlopes, DimensionMismatch, NonPositiveWeight, NotPositivelyStable
from app.src.spectral import balanced_norm, balancing_weights


@dataclass(frozen=True)
class ConvexProfile:
    """f(t) = ((a+b)/2) t + ((b-a)/2)(sqrt(t^2 + kappa^2) - kappa).

    Strictly convex, f(0) = 0, f' increasing from a (t -> -inf) to b (t -> +inf).
    """

    a: float
    b: float
    kappa: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise BadSlopes(f"need a < b, got a = {self.a}, b = {self.b}")
        if not self.kappa > 0:
            raise BadSlopes(f"curvature scale kappa must be positive, got {self.kappa}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half_range(self) -> float:
        return 0.5 * (self.b - self.a)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return self.mid * t + self.half_range * (np.hypot(t, self.kappa) - self.kappa)

    def fprime(self, t):
        t = np.asarray(t, dtype=float)
        return self.mid + self.half_range * t / np.hypot(t, self.kappa)

    def fsecond(self, t):
        t = np.asarray(t, dtype=float)
        return self.half_range * self.kappa**2 / np.hypot(t, self.kappa) ** 3

    def quotient(self, r, s):
        """Newton quotient (f(r) - f(s)) / (r - s), written without cancellation; q(r, r) = f'(r)."""
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.mid + self.half_range * (r + s) / (np.hypot(r, self.kappa) + np.hypot(s, self.kappa))

    def shifted(self, c: float) -> "ConvexProfile":
        """Profile of f - c * id."""
        return ConvexProfile(self.a - c, self.b - c, self.kappa)

    def rescaled(self, gamma: float) -> "ConvexProfile":
        """Profile of id + f / gamma, with slopes 1 + a/gamma and 1 + b/gamma."""
        return ConvexProfile(1.0 + self.a / gamma, 1.0 + self.b / gamma, self.kappa)


def make_convex_profile(a: float, b: float, kappa: float = 1.0) -> ConvexProfile:
    return ConvexProfile(float(a), float(b), float(kappa))


class NonlinearMap(ABC):
    kind: str = ""

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionMismatch("map dimension must be >= 1")
        self.dim = dim

    def _vector(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise DimensionMismatch(f"expected a vector of length {self.dim}, got shape {u.shape}")
        return u

    def __call__(self, u) -> np.ndarray:
        return self.evaluate(u)

    @abstractmethod
    def evaluate(self, u) -> np.ndarray: ...

    @abstractmethod
    def jacobian(self, u) -> np.ndarray: ...

    @abstractmethod
    def linearize(self, u, v) -> np.ndarray: ...

    @abstractmethod
    def slice_bound(self, gamma: float, phi: np.ndarray, phi_star: np.ndarray) -> float:
        """Upper bound of ||Pi_W (G(u, v) - gamma I)|| over all u, v.

        The norm is the balanced one, ||X|| = ||D^-1 X D|| with
        D = diag(balancing_weights(phi, phi_star)), in which Pi_W is an
        orthogonal projector. For phi = phi* it is the spectral norm.
        """

    @abstractmethod
    def default_center(self, phi: np.ndarray, phi_star: np.ndarray) -> float: ...


class NemitskiiMap(NonlinearMap):
    kind = "nemitskii"

    def __init__(self, profile: ConvexProfile, dim: int):
        super().__init__(dim)
        self.profile = profile

    def evaluate(self, u):
        return self.profile.f(self._vector(u))

    def jacobian(self, u):
        return np.diag(self.profile.fprime(self._vector(u)))

    def linearize(self, u, v):
        return np.diag(self.profile.quotient(self._vector(u), self._vector(v)))

    def slice_bound(self, gamma, phi, phi_star):
        # diagonal G commutes with D
        return max(self.profile.b - gamma, gamma - self.profile.a)

    def default_center(self, phi, phi_star):
        return self.profile.mid


class NonlocalMap(NonlinearMap):
    """P(u) = A^T (g * f(A u)), the gradient of sum_i g_i F(<a_i, u>)."""

    kind = "nonlocal"

    def __init__(self, A, g, profile: ConvexProfile):
        A = np.asarray(A, dtype=float)
        g = np.asarray(g, dtype=float)
        if A.ndim != 2 or g.shape != (A.shape[0],):
            raise DimensionMismatch(f"A must be m x n and g of length m, got {A.shape} and {g.shape}")
        if np.any(A < 0) or np.any(np.all(A == 0, axis=1)):
            raise NotPositivelyStable("A must be entrywise nonnegative with no zero row")
        if np.any(g <= 0):
            raise NonPositiveWeight("weights g must be strictly positive")
        super().__init__(A.shape[1])
        self.profile = profile
        self.A = A
        self.g = g
        singular = np.linalg.svd(A, compute_uv=False)
        self._s_max = float(singular[0])
        self._s_min = float(singular[-1]) if A.shape[0] >= A.shape[1] else 0.0

    def evaluate(self, u):
        return self.A.T @ (self.g * self.profile.f(self.A @ self._vector(u)))

    def _weighted(self, d: np.ndarray) -> np.ndarray:
        return (self.A.T * (self.g * d)) @ self.A

    def jacobian(self, u):
        return self._weighted(self.profile.fprime(self.A @ self._vector(u)))

    def linearize(self, u, v):
        Au, Av = self.A @ self._vector(u), self.A @ self._vector(v)
        return self._weighted(self.profile.quotient(Au, Av))

    def spectral_range(self) -> tuple[float, float]:
        """Interval containing the spectrum of every G(u, v)."""
        a, b = self.profile.a, self.profile.b
        g_min, g_max = float(np.min(self.g)), float(np.max(self.g))
        lo = a * g_min * self._s_min**2 if a >= 0 else a * g_max * self._s_max**2
        hi = b * g_max * self._s_max**2 if b >= 0 else b * g_min * self._s_min**2
        return lo, hi

    def slice_bound(self, gamma, phi, phi_star):
        # G is not diagonal, so the balancing similarity costs cond(D)
        d = balancing_weights(phi, phi_star)
        lo, hi = self.spectral_range()
        return max(hi - gamma, gamma - lo) * float(np.max(d) / np.min(d))

    def default_center(self, phi, phi_star):
        lo, hi = self.spectral_range()
        return 0.5 * (lo + hi)


class VerticalSineMap(NonlinearMap):
    """P(u) = lambda_m u - t sin(t) phi with t = <phi*, u>.

    For L phi = lambda_m phi the height of F = L - P along any fiber is t sin t.
    """

    kind = "vertical_sine"

    def __init__(self, phi, phi_star, lambda_m: float):
        phi = np.asarray(phi, dtype=float)
        phi_star = np.asarray(phi_star, dtype=float)
        if abs(float(phi_star @ phi) - 1.0) > 1e-10:
            raise BadNormalization(f"<phi*, phi> = {float(phi_star @ phi):.12g}, expected 1")
        super().__init__(phi.shape[0])
        self.lambda_m = float(lambda_m)
        self.phi = phi
        self.phi_star = phi_star
        self._rank_one = np.outer(phi, phi_star)

    def evaluate(self, u):
        u = self._vector(u)
        t = float(self.phi_star @ u)
        return self.lambda_m * u - t * np.sin(t) * self.phi

    def jacobian(self, u):
        t = float(self.phi_star @ self._vector(u))
        return self.lambda_m * np.eye(self.dim) - (np.sin(t) + t * np.cos(t)) * self._rank_one

    def linearize(self, u, v):
        tu = float(self.phi_star @ self._vector(u))
        tv = float(self.phi_star @ self._vector(v))
        d = tu - tv
        slope = np.sin(tu) + tv * np.cos(0.5 * (tu + tv)) * np.sinc(d / (2.0 * np.pi))
        return self.lambda_m * np.eye(self.dim) - slope * self._rank_one

    def slice_bound(self, gamma, phi, phi_star):
        # Pi_W annihilates the rank-one part of G - lambda_m I
        return abs(self.lambda_m - gamma)

    def default_center(self, phi, phi_star):
        return self.lambda_m


class LinearMap(NonlinearMap):
    """P(u) = B u; covers the zero map."""

    kind = "linear"

    def __init__(self, B):
        B = np.asarray(B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise DimensionMismatch(f"B must be square, got {B.shape}")
        super().__init__(B.shape[0])
        self.B = B

    def evaluate(self, u):
        return self.B @ self._vector(u)

    def jacobian(self, u):
        return self.B.copy()

    def linearize(self, u, v):
        return self.B.copy()

    def slice_bound(self, gamma, phi, phi_star):
        Pi = np.eye(self.dim) - np.outer(phi, phi_star)
        return balanced_norm(Pi @ (self.B - gamma * np.eye(self.dim)) @ Pi, balancing_weights(phi, phi_star))

    def default_center(self, phi, phi_star):
        return 0.0


def nemitskii(profile: ConvexProfile, dim: int) -> NemitskiiMap:
    return NemitskiiMap(profile, dim)


def nonlocal_map(A, g, profile: ConvexProfile) -> NonlocalMap:
    return NonlocalMap(A, g, profile)


def vertical_sine_map(phi, phi_star, lambda_m: float) -> VerticalSineMap:
    return VerticalSineMap(phi, phi_star, lambda_m)


def linear_map(B) -> LinearMap:
    return LinearMap(B)


def zero_map(dim: int) -> LinearMap:
    return LinearMap(np.zeros((dim, dim)))


def linearize(P: NonlinearMap, u, v) -> np.ndarray:
    return P.linearize(u, v)
