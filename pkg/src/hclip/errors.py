"""Exception types shared across the package."""


class HclipError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(HclipError):
    """A vector or dimension argument is malformed (d = 0, length mismatch, ...)."""


class InvalidProblemError(HclipError):
    """A test-problem constructor received parameters violating its contract."""


class MomentUnboundedError(HclipError):
    """The requested noise family has an infinite alpha-th moment (tail_p <= alpha)."""


class InvalidTargetError(HclipError):
    """A privacy target is out of range (delta outside (0,1), K = 0, ...)."""


class TablesNotApplicableError(HclipError):
    """Regime tables assume no DP noise; raised when sigma_omega > 0."""


class DivergedError(HclipError):
    """An optimization run produced a non-finite or runaway iterate."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"iterate diverged at step {step}")
