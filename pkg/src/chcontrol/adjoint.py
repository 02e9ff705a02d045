"""Backward-in-time adjoint solver for the reduced cost gradient.

The adjoint system is the continuous one associated with the state system
and the tracking cost, discretized directly (optimize-then-discretize).
Marching backward from the terminal conditions, each step first advances
the adjoint of the order parameter through the shared linear bulk/surface
step, with the adjoint of the chemical potential entering through
already-computed later-in-time levels (the same one-level lag the forward
and linearized solvers use, run in reverse), then advances the adjoint of
the chemical potential implicitly with the fresh values.

Because the forward scheme is not transposed, the duality identity between
this adjoint and the linearized solver holds only up to a discretization
gap of first order in the time step; the verification module measures that
gap instead of assuming it is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from .errors import LinearSolveError, TerminalCompatibilityError
from .geometry import MeshOperators
from .objective import CostSpec
from .parabolic import LinearStepProblem, linear_step
from .potentials import PotentialSet
from .state import SolverOptions, StateTrajectory

__all__ = [
    "AdjointTrajectory",
    "CompatibilityReport",
    "check_compatibility_A7",
    "solve_adjoint",
]


@dataclass
class AdjointTrajectory:
    """Adjoint triple: chemical-potential adjoint, order-parameter adjoint,
    and its boundary trace, with exact terminal conditions."""

    times: np.ndarray
    p: np.ndarray
    q: np.ndarray
    q_g: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class CompatibilityReport:
    passed: bool
    max_mismatch: float
    message: str


def check_compatibility_A7(
    spec: CostSpec,
    terminal_rho: np.ndarray,
    terminal_rho_g: np.ndarray,
    ops: MeshOperators,
    tol: float = 1e-10,
) -> CompatibilityReport:
    """Check that the two terminal adjoint conditions agree on the boundary.

    The bulk terminal condition restricted to the boundary must equal the
    boundary terminal condition nodewise (trivially true when both
    terminal weights vanish); otherwise the adjoint system has no solution
    with an exact trace and the solve refuses to start.
    """
    bulk_terminal = spec.weight_terminal * (terminal_rho - spec.target_terminal)
    boundary_terminal = spec.weight_terminal_boundary * (
        terminal_rho_g - spec.target_terminal_boundary
    )
    mismatch = float(
        np.max(np.abs(ops.trace_values(bulk_terminal) - boundary_terminal), initial=0.0)
    )
    if spec.weight_terminal == 0.0 and spec.weight_terminal_boundary == 0.0:
        return CompatibilityReport(True, 0.0, "both terminal weights vanish")
    if mismatch <= tol:
        return CompatibilityReport(
            True, mismatch, f"terminal conditions agree to {mismatch:.3e}"
        )
    return CompatibilityReport(
        False,
        mismatch,
        f"terminal bulk/boundary mismatch {mismatch:.3e} exceeds {tol:g}; "
        "use equal terminal weights with trace-compatible targets",
    )


def solve_adjoint(
    base: StateTrajectory,
    spec: CostSpec,
    ps: PotentialSet,
    ops: MeshOperators,
    opts: SolverOptions = SolverOptions(),
) -> AdjointTrajectory:
    """Solve the adjoint system backward from the terminal conditions.

    Raises
    ------
    TerminalCompatibilityError
        If the terminal compatibility check fails.
    """
    M = base.n_steps
    dt = base.dt
    spec.validate(ops, M + 1)

    report = check_compatibility_A7(spec, base.rho[-1], base.rho_g[-1], ops)
    if not report.passed:
        raise TerminalCompatibilityError(report.message)

    p = np.zeros((M + 1, ops.n_bulk))
    q = np.zeros((M + 1, ops.n_bulk))
    q_g = np.zeros((M + 1, ops.n_boundary))
    q[M] = spec.weight_terminal * (base.rho[M] - spec.target_terminal)
    # Canonical boundary value is the trace; the compatibility check has
    # certified agreement with the boundary terminal condition.
    q_g[M] = ops.trace_values(q[M])

    dmu = base.time_derivative(base.mu)
    drho = base.time_derivative(base.rho)

    for k in range(M - 1, -1, -1):
        rho_k = base.rho[k]
        rho_g_k = base.rho_g[k]
        mu_k = base.mu[k]
        p_lag = p[k + 1]
        dp_lag = (p[k + 2] - p[k + 1]) / dt if k + 2 <= M else np.zeros(ops.n_bulk)

        gp = ps.coupling.d1(rho_k)
        problem = LinearStepProblem(
            reaction_bulk=(
                ps.convex_bulk.d2(rho_k)
                + ps.smooth_bulk.d1(rho_k)
                - mu_k * ps.coupling.d2(rho_k)
            ),
            reaction_boundary=(
                ps.convex_boundary.d2(rho_g_k) + ps.smooth_boundary.d1(rho_g_k)
            ),
            source_bulk=(
                gp * (mu_k * dp_lag - dmu[k] * p_lag)
                + spec.weight_rho * (rho_k - spec.target_rho[k])
            ),
            source_boundary=spec.weight_rho_boundary
            * (rho_g_k - spec.target_rho_boundary[k]),
            dt=dt,
            previous_bulk=q[k + 1],
            previous_boundary=q_g[k + 1],
        )
        q[k], q_g[k] = linear_step(problem, ops)

        capacity = 1.0 + 2.0 * ps.coupling.value(rho_k)
        A = (sps.diags(capacity / dt - gp * drho[k]) - ops.laplacian_bulk).tocsc()
        rhs = (
            capacity / dt * p[k + 1]
            + gp * q[k]
            + spec.weight_mu * (base.mu[k] - spec.target_mu[k])
        )
        p_new = spsolve(A, rhs)
        if not np.all(np.isfinite(p_new)):
            raise LinearSolveError(
                f"adjoint potential solve produced non-finite values at level {k}"
            )
        p[k] = p_new

    return AdjointTrajectory(times=base.times.copy(), p=p, q=q, q_g=q_g)
