"""Exception types raised across the package.

Validation errors subclass ValueError so generic callers can catch them;
runtime failures of an integration subclass RuntimeError.
"""


class RelflowError(Exception):
    """Base class for package-specific errors."""


class ParameterError(RelflowError, ValueError):
    """A model or configuration parameter violates an admissibility invariant.

    The ``invariant`` attribute names the violated condition.
    """

    def __init__(self, invariant: str, message: str | None = None):
        self.invariant = invariant
        super().__init__(message or f"invariant violated: {invariant}")


class DomainError(RelflowError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation would hit a genuine singularity (e.g. P'' at vacuum for soft pressure laws)."""


class GridMismatchError(RelflowError, ValueError):
    """Fields on different grids were combined."""


class ResolutionError(RelflowError, ValueError):
    """A kernel or stencil is too narrow for the lattice spacing."""


class PairBoundsError(RelflowError, ValueError):
    """A comparison pair violates its density bounds r1 <= r (<= r2)."""


class HypothesisError(RelflowError, ValueError):
    """A lemma hypothesis fails (e.g. weight with zero mass in the Korn estimator)."""


class VacuumError(RelflowError, RuntimeError):
    """Density dipped below half the configured floor during integration."""

    def __init__(self, message: str, time: float | None = None, step: int | None = None):
        super().__init__(message)
        self.time = time
        self.step = step


class NumericsError(RelflowError, RuntimeError):
    """Non-finite values appeared; carries the failure time/step when known."""

    def __init__(self, message: str, time: float | None = None, step: int | None = None):
        super().__init__(message)
        self.time = time
        self.step = step


class CalibrationError(RelflowError, RuntimeError):
    """Constant calibration could not satisfy the verdicts within its search range."""

    def __init__(self, message: str, scenario: str | None = None):
        super().__init__(message)
        self.scenario = scenario
