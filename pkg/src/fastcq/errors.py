"""Exception hierarchy shared by all fastcq modules."""

from __future__ import annotations


class FastCQError(Exception):
    """Base class for every error raised by the package."""


class DegenerateSeries(FastCQError, ValueError):
    """The base series has a zero constant term, so its power is not expandable."""


class UnsupportedOrder(FastCQError, ValueError):
    """Requested method order (or fractional order) is outside the supported set."""


class InvalidGeneratingFunction(FastCQError, ValueError):
    """A custom generating function violates stability or consistency."""


class SeriesDivergence(FastCQError, ArithmeticError):
    """A truncated series did not converge within its term budget."""


class IllConditionedStartingSystem(FastCQError, ArithmeticError):
    """The generalized Vandermonde system for starting weights is (nearly) singular."""


class ScheduleNotNeeded(FastCQError, ValueError):
    """Block schedule requested for an index that lies inside the local window."""


class UnsupportedForMethodII(FastCQError, ValueError):
    """The generating function has no real-line representation usable by the
    trapezoidal (real-line) fast method."""


class SequenceError(FastCQError, RuntimeError):
    """Samples were supplied out of order."""


class NonlinearSolveFailure(FastCQError, RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message)
        self.step = step


class StepFailure(FastCQError, RuntimeError):
    """A time step of the reaction-diffusion solver could not be completed."""

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message)
        self.step = step
