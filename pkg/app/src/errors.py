# errors.py
from typing import Optional, Sequence


class FoldError(Exception):
    """Base class for every failure raised by the fold-maps modules."""


# ---- linear algebra

class NonSymmetricInput(FoldError, ValueError):
    pass


class DimensionMismatch(FoldError, ValueError):
    pass


class NoConvergence(FoldError, RuntimeError):
    def __init__(self, message: str, *, iterations: int = 0, residual: float = float("nan"), t: Optional[float] = None):
        if t is not None:
            message = f"{message} (t={t:.6g})"
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.t = t


class NotPrimitive(FoldError, ValueError):
    pass


class SingularMatrix(FoldError, ValueError):
    pass


class SingularShift(SingularMatrix):
    pass


# ---- certificates

class CertificateError(FoldError, RuntimeError):
    """Certification failure naming the first violated item (b-1, b-2 or b-3)."""

    item = ""

    def __init__(self, message: str):
        super().__init__(f"[{self.item}] {message}" if self.item else message)


class NotErgodic(CertificateError):
    item = "b-1"


class GapTooSmall(CertificateError):
    item = "b-2"


class DegenerateWitness(CertificateError):
    item = "b-3"


class SpecInvalid(FoldError, ValueError):
    pass


class CertificationFailed(FoldError, RuntimeError):
    pass


# ---- nonlinear maps

class BadSlopes(FoldError, ValueError):
    pass


class NotPositivelyStable(FoldError, ValueError):
    pass


class NonPositiveWeight(FoldError, ValueError):
    pass


class BadNormalization(FoldError, ValueError):
    pass


# ---- fibers / verify

class NotAContraction(FoldError, RuntimeError):
    pass


class WindowTooNarrow(FoldError, RuntimeError):
    pass


class SupplierMissing(FoldError, LookupError):
    pass


class DimensionTooLarge(FoldError, ValueError):
    pass


class CriticalPoint(FoldError, ValueError):
    def __init__(self, message: str, *, lambda_value: float = 0.0):
        super().__init__(message)
        self.lambda_value = lambda_value


# ---- configuration

class ConfigError(FoldError):
    pass


class ConfigIoError(ConfigError, OSError):
    pass


class ConfigParseError(ConfigError, ValueError):
    def __init__(self, message: str, *, line: Optional[int] = None, column: Optional[int] = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ConfigValidationError(ConfigError, ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.problems))
