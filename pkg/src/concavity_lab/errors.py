"""Exception hierarchy.

Every error carries the module and operation that raised it so the CLI can
name the failing step; the class decides the CLI exit status.
"""


class ConcavityLabError(Exception):
    exit_status = 2

    def __init__(self, module, operation, message):
        self.module = module
        self.operation = operation
        super().__init__(f"[{module}.{operation}] {message}")


class ValidationError(ConcavityLabError, ValueError):
    """Invalid input or configuration."""

    exit_status = 1


class SolverError(ConcavityLabError, RuntimeError):
    """A deterministic solver failed (non-convergence, NaN, bad grid)."""

    exit_status = 2


class EstimationError(ConcavityLabError, RuntimeError):
    """A Monte Carlo estimator refused to produce an estimate."""

    exit_status = 2


class TheoremCheckFailure(ConcavityLabError):
    """The computation succeeded but a theorem-level check did not hold."""

    exit_status = 3
