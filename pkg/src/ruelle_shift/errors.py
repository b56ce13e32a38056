"""Exception types raised across the package."""


class RuelleShiftError(Exception):
    """Base class for all package errors."""


class SpaceMismatch(RuelleShiftError):
    pass


class UnsupportedKind(RuelleShiftError):
    def __init__(self, message: str, max_degree: int | None = None):
        super().__init__(message)
        self.max_degree = max_degree


class MissingTailClass(RuelleShiftError):
    pass


class NonpositiveEigenfunction(RuelleShiftError):
    pass


class BudgetExceeded(RuelleShiftError):
    pass


class NonFinite(RuelleShiftError):
    pass


class NonConvergence(RuelleShiftError):
    pass


class ScheduleDiverged(RuelleShiftError):
    pass


class Stagnation(RuelleShiftError):
    pass


class NotNormalized(RuelleShiftError):
    pass


class SizeMismatch(RuelleShiftError):
    pass


class LipschitzAuditFailed(RuelleShiftError):
    pass


class PremiseViolated(RuelleShiftError):
    """A hypothesis of a contraction estimate does not hold for the given input."""

    def __init__(self, premise: str, detail: str = ""):
        super().__init__(f"premise violated: {premise}" + (f" ({detail})" if detail else ""))
        self.premise = premise


class ClosureViolation(RuelleShiftError):
    pass


class NotStochastic(RuelleShiftError):
    pass


class ConfigInvalid(RuelleShiftError):
    def __init__(self, message: str, errors: list | None = None):
        super().__init__(message)
        self.errors = errors or []
