"""Exception hierarchy shared by all solver modules.

Two families matter for callers: configuration-type errors (bad input,
rejected before any solve) and solver-type errors (a solve was attempted
and failed).  The CLI maps the first family to exit code 2 and the second
to exit code 3.
"""


class ConfigurationError(ValueError):
    """Rejected input: invalid mesh, parameters, or assumption violation."""


class ContractViolationError(ValueError):
    """Mismatched shapes or grids passed between modules."""


class AdmissibilityError(ConfigurationError):
    """A control tagged admissible violates the box or norm constraints."""


class SolverError(RuntimeError):
    """A solve was attempted and did not produce a usable result."""


class LinearSolveError(SolverError):
    """Sparse linear solve failed or left a large residual."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class NewtonError(SolverError):
    """Nonlinear iteration exhausted its budget at some time step."""

    def __init__(self, message, step_index=None, residual_norm=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual_norm = residual_norm


class SeparationViolationError(SolverError):
    """An order-parameter value left the safe subinterval of (-1, 1)."""

    def __init__(self, message, node_index=None, value=None):
        super().__init__(message)
        self.node_index = node_index
        self.value = value


class TerminalCompatibilityError(SolverError):
    """Terminal adjoint data fails the bulk/boundary matching condition."""


class UndefinedRatioError(ValueError):
    """A probe ratio has a vanishing denominator and carries no information."""
