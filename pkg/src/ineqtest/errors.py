"""Exception types raised by the numerical engine.

ValueError is used for plain argument problems (bad shapes, out-of-range
levels).  The classes below cover failures of the numerics themselves, so
callers (and the CLI) can distinguish usage errors from numerical ones.
"""


class NumericalError(RuntimeError):
    """Base class for numerical failures (exit code 2 in the CLI)."""


class CovarianceError(NumericalError):
    """A covariance matrix is not (numerically) positive definite.

    ``pivot_index`` is the 1-based index of the Cholesky pivot that failed,
    when known.
    """

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class InfeasibleError(NumericalError):
    """A constraint system has no feasible point."""


class DegeneratePivotError(NumericalError):
    """The LP simplex hit a numerically singular basis."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BudgetExceededError(NumericalError):
    """Vertex enumeration would exceed the combinatorial budget.

    Only the refinement step of the subvector test needs explicit vertex
    enumeration; tests that stop at the rank computation never hit this.
    """


class InternalInvariantError(NumericalError):
    """An internal precondition was violated (indicates a caller bug)."""
