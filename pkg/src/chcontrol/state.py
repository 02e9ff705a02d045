"""Forward solver for the coupled chemical-potential / order-parameter
system with a dynamic boundary condition.

Each time step is a decoupled two-stage update, mirroring the time-lagged
construction the well-posedness theory itself uses:

1. the order-parameter equations (bulk and dynamic boundary condition) are
   advanced by backward Euler with the chemical potential frozen at the
   previous level; the singular potential derivative is implicit and the
   coupled bulk/surface nonlinear system is solved by a safeguarded Newton
   iteration that keeps every iterate inside the separation interval;
2. the chemical-potential equation is advanced by a linear implicit step
   with coefficients frozen at the fresh order parameter, the unknown
   implicit in both the time-derivative term and the product with the
   order-parameter rate.  This preserves the sign structure that keeps the
   chemical potential nonnegative.

Discrete positivity of the chemical potential and the separation property
are monitored, not proven: positivity failures beyond a tolerance are
recorded as warnings, separation failures abort the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from .errors import (
    ConfigurationError,
    ContractViolationError,
    LinearSolveError,
    NewtonError,
    SeparationViolationError,
    UndefinedRatioError,
)
from .geometry import (
    MeshOperators,
    gradient_inner_boundary,
    gradient_inner_bulk,
    space_time_inner_boundary,
    time_weights,
)
from .parabolic import energy_norm_boundary, energy_norm_bulk
from .potentials import PotentialSet

__all__ = [
    "InitialData",
    "ControlTrajectory",
    "StateTrajectory",
    "SolverOptions",
    "solve_state",
    "free_energy",
    "lipschitz_probe",
]


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the nonlinear and monitoring machinery.

    The Newton tolerance is deliberately far below the discretization
    error so that verification tolerances are attributable to the scheme,
    not to unconverged solves.
    """

    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    max_backtracks: int = 40
    positivity_factor: float = 1e-8


@dataclass(frozen=True)
class InitialData:
    """Initial chemical potential (nonnegative) and order parameter
    (inside the separation interval)."""

    mu0: np.ndarray
    rho0: np.ndarray

    def validate(self, ops: MeshOperators, eps_sep: float) -> None:
        mu0 = np.asarray(self.mu0, dtype=float)
        rho0 = np.asarray(self.rho0, dtype=float)
        if mu0.shape != (ops.n_bulk,) or rho0.shape != (ops.n_bulk,):
            raise ContractViolationError(
                f"initial fields must have shape ({ops.n_bulk},)"
            )
        if np.any(mu0 < 0.0):
            raise ConfigurationError(
                "(A1) initial chemical potential must be nonnegative nodewise"
            )
        margin = 1.0 - float(np.max(np.abs(rho0)))
        if margin < eps_sep:
            raise ConfigurationError(
                f"(A1) initial order parameter must keep a margin of at least "
                f"{eps_sep:g} from -1 and 1; margin is {margin:g}"
            )


@dataclass
class ControlTrajectory:
    """Boundary control on the state time grid, shape (M+1, N_b)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.shape[0]:
            raise ContractViolationError(
                "control values and time grid have inconsistent lengths"
            )

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def h1_linf_norm(self, ops: MeshOperators) -> float:
        """Sum of the discrete H1-in-time norm and the sup norm.

        This is the recorded control-space norm; the admissible-ball cap is
        monitored against it.
        """
        wt = time_weights(self.times)
        l2_sq = float(np.einsum("k,kn,n,kn->", wt, self.values,
                                ops.boundary_weights, self.values))
        dq = np.diff(self.values, axis=0) / self.dt
        h1_sq = self.dt * float(np.einsum("kn,n,kn->", dq, ops.boundary_weights, dq))
        return float(np.sqrt(l2_sq + h1_sq)) + float(np.max(np.abs(self.values), initial=0.0))

    def copy_with(self, values: np.ndarray) -> "ControlTrajectory":
        return ControlTrajectory(times=self.times, values=np.asarray(values, dtype=float))


@dataclass
class StateTrajectory:
    """Solution triple of one forward run plus per-step diagnostics."""

    times: np.ndarray
    mu: np.ndarray
    rho: np.ndarray
    rho_g: np.ndarray
    newton_iterations: np.ndarray = None
    positivity_warnings: list = field(default_factory=list)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1

    def min_mu(self) -> float:
        return float(np.min(self.mu))

    def separation_margin(self) -> float:
        return 1.0 - float(np.max(np.abs(self.rho)))

    def time_derivative(self, levels: np.ndarray) -> np.ndarray:
        """Backward difference quotients per level; level 0 reuses level 1."""
        levels = np.asarray(levels)
        d = np.empty_like(levels)
        d[1:] = (levels[1:] - levels[:-1]) / self.dt
        d[0] = d[1]
        return d

    def validate(self, ops: MeshOperators, eps_sep: float) -> None:
        """Check the hard invariants: exact traces and separation.

        Positivity of the chemical potential is a monitored quantity, not
        a hard invariant; probes inspect :meth:`min_mu` directly.
        """
        for k in range(self.times.shape[0]):
            if not np.array_equal(self.rho_g[k], ops.trace_values(self.rho[k])):
                raise ContractViolationError(
                    f"trace compatibility broken at level {k}"
                )
        if self.separation_margin() < eps_sep * (1.0 - 1e-12):
            worst = int(np.argmax(np.abs(self.rho).max(axis=0)))
            raise SeparationViolationError(
                "trajectory violates the separation margin",
                node_index=worst,
            )


def _nonlinear_terms(rho, ps: PotentialSet, mu_old, ops: MeshOperators):
    """Residual contribution and its derivative for the implicit stage.

    Boundary rows are half-cell flux balances, so they carry the bulk
    nonlinearity with the boundary node's cell weight on top of the
    boundary potential terms.
    """
    bidx = ops.mesh.boundary_index
    cw = ops.boundary_cell_weight
    rho_b = rho[bidx]
    val = (
        ps.convex_bulk.d1(rho)
        + ps.smooth_bulk.value(rho)
        - mu_old * ps.coupling.d1(rho)
    )
    der = (
        ps.convex_bulk.d2(rho)
        + ps.smooth_bulk.d1(rho)
        - mu_old * ps.coupling.d2(rho)
    )
    val[bidx] = cw * val[bidx] + ps.convex_boundary.d1(rho_b) + ps.smooth_boundary.value(rho_b)
    der[bidx] = cw * der[bidx] + ps.convex_boundary.d2(rho_b) + ps.smooth_boundary.d1(rho_b)
    return val, der


def _step_ceiling(rho, delta, lo, hi):
    """Largest fraction of the Newton step keeping all nodes in [lo, hi]."""
    alpha = 1.0
    pos = delta > 0
    neg = delta < 0
    if np.any(pos):
        alpha = min(alpha, float(np.min((hi - rho[pos]) / delta[pos])))
    if np.any(neg):
        alpha = min(alpha, float(np.min((lo - rho[neg]) / delta[neg])))
    return max(alpha, 0.0)


def _bisection_sweep(rho, diag_linear, offdiag, rhs, ps, mu_old, ops, lo, hi):
    """Nodewise bisection on the monotone scalar residual, off-diagonal frozen.

    Robust fallback when damped Newton stalls: the singular potential
    derivative makes each scalar residual strictly increasing, so a root
    inside the safe interval is bracketed whenever it exists.
    """
    mask = ops.interior_mask
    cell_weight = np.zeros(rho.size)
    cell_weight[ops.mesh.boundary_index] = ops.boundary_cell_weight
    new = rho.copy()
    for i in range(rho.size):
        if mask[i]:
            def scalar(s, i=i):
                return (
                    diag_linear[i] * s
                    + ps.convex_bulk.d1(s)
                    + ps.smooth_bulk.value(s)
                    - mu_old[i] * ps.coupling.d1(s)
                    + offdiag[i]
                    - rhs[i]
                )
        else:
            def scalar(s, i=i):
                bulk_part = (
                    ps.convex_bulk.d1(s)
                    + ps.smooth_bulk.value(s)
                    - mu_old[i] * ps.coupling.d1(s)
                )
                return (
                    diag_linear[i] * s
                    + cell_weight[i] * bulk_part
                    + ps.convex_boundary.d1(s)
                    + ps.smooth_boundary.value(s)
                    + offdiag[i]
                    - rhs[i]
                )
        flo, fhi = scalar(lo), scalar(hi)
        if flo > 0.0 or fhi < 0.0:
            raise SeparationViolationError(
                "implicit stage has no solution inside the separation interval",
                node_index=i,
                value=float(rho[i]),
            )
        a, b = lo, hi
        for _ in range(80):
            m = 0.5 * (a + b)
            if scalar(m) <= 0.0:
                a = m
            else:
                b = m
        new[i] = 0.5 * (a + b)
    return new


def _solve_rho_stage(rho_old, mu_old, u_new, ps, ops, opts, dt, step_index):
    """One implicit stage for the order parameter; returns (rho, iterations)."""
    bidx = ops.mesh.boundary_index
    cw = ops.boundary_cell_weight
    lo, hi = ps.safe_interval

    mass = np.ones(ops.n_bulk)
    mass[bidx] += cw
    rhs_full = mass * rho_old / dt
    rhs_full[bidx] += u_new

    base = ops.coupled_spatial + sps.diags(mass / dt)
    base = base.tocsr()

    rho = rho_old.copy()

    def residual(r):
        val, _ = _nonlinear_terms(r, ps, mu_old, ops)
        return base @ r + val - rhs_full

    res = residual(rho)
    norm = float(np.max(np.abs(res)))
    for iteration in range(opts.newton_max_iter):
        if norm < opts.newton_tol:
            return rho, iteration
        _, der = _nonlinear_terms(rho, ps, mu_old, ops)
        jac = (base + sps.diags(der)).tocsc()
        delta = spsolve(jac, -res)
        if not np.all(np.isfinite(delta)):
            raise LinearSolveError(
                f"Newton linear solve produced non-finite step at time step {step_index}"
            )

        alpha = min(1.0, 0.995 * _step_ceiling(rho, delta, lo, hi))
        accepted = False
        for _ in range(opts.max_backtracks):
            if alpha <= 0.0:
                break
            trial = rho + alpha * delta
            trial_res = residual(trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm <= (1.0 - 1e-4 * alpha) * norm:
                rho, res, norm = trial, trial_res, trial_norm
                accepted = True
                break
            alpha *= 0.5

        if not accepted:
            # Damped Newton stalled; one monotone bisection sweep makes
            # guaranteed progress or proves the root left the safe interval.
            diag_linear = base.diagonal()
            linear_part = base @ rho
            offdiag = linear_part - diag_linear * rho
            rho = _bisection_sweep(
                rho, diag_linear, offdiag, rhs_full, ps, mu_old, ops, lo, hi
            )
            res = residual(rho)
            norm = float(np.max(np.abs(res)))

    if norm < opts.newton_tol:
        return rho, opts.newton_max_iter
    raise NewtonError(
        f"Newton did not reach tolerance {opts.newton_tol:g} at time step "
        f"{step_index}; residual max-norm is {norm:.3e}",
        step_index=step_index,
        residual_norm=norm,
    )


def _solve_mu_stage(mu_old, rho_new, rho_old, ps, ops, dt, step_index):
    """Linear implicit stage for the chemical potential."""
    g = ps.coupling.value(rho_new)
    gp = ps.coupling.d1(rho_new)
    drho_dt = (rho_new - rho_old) / dt
    capacity = 1.0 + 2.0 * g
    diag = capacity / dt + gp * drho_dt
    A = (sps.diags(diag) - ops.laplacian_bulk).tocsc()
    rhs = capacity / dt * mu_old
    mu = spsolve(A, rhs)
    if not np.all(np.isfinite(mu)):
        raise LinearSolveError(
            f"chemical-potential solve produced non-finite values at step {step_index}"
        )
    residual = float(np.linalg.norm(A @ mu - rhs)) / (1.0 + float(np.linalg.norm(rhs)))
    if residual > 1e-8:
        raise LinearSolveError(
            f"chemical-potential solve left relative residual {residual:.3e}",
            residual_norm=residual,
        )
    return mu


def solve_state(
    init: InitialData,
    control: ControlTrajectory,
    ps: PotentialSet,
    ops: MeshOperators,
    opts: SolverOptions = SolverOptions(),
) -> StateTrajectory:
    """March the full state system over the control's time grid.

    Returns the trajectory with per-step Newton iteration counts; the
    separation property is enforced per iterate and positivity of the
    chemical potential is monitored (a dip beyond tolerance is recorded as
    a warning entry, not an error).
    """
    init.validate(ops, ps.eps_sep)
    times = control.times
    if times.shape[0] < 2:
        raise ContractViolationError("need at least two time levels")
    if control.values.shape[1] != ops.n_boundary:
        raise ContractViolationError(
            f"control has {control.values.shape[1]} boundary nodes, "
            f"grid has {ops.n_boundary}"
        )
    dt = control.dt
    M = times.shape[0] - 1

    mu = np.empty((M + 1, ops.n_bulk))
    rho = np.empty((M + 1, ops.n_bulk))
    rho_g = np.empty((M + 1, ops.n_boundary))
    mu[0] = np.asarray(init.mu0, dtype=float)
    rho[0] = np.asarray(init.rho0, dtype=float)
    rho_g[0] = ops.trace_values(rho[0])
    iters = np.zeros(M, dtype=int)
    warnings_log = []

    for k in range(M):
        # Midpoint control sampling keeps the discrete control gradient
        # consistent with the trapezoid time quadrature at both endpoints.
        u_step = 0.5 * (control.values[k] + control.values[k + 1])
        rho_new, iters[k] = _solve_rho_stage(
            rho[k], mu[k], u_step, ps, ops, opts, dt, k
        )
        mu_new = _solve_mu_stage(mu[k], rho_new, rho[k], ps, ops, dt, k)

        tol_pos = opts.positivity_factor * max(1.0, float(np.max(np.abs(mu_new))))
        mu_min = float(np.min(mu_new))
        if mu_min < -tol_pos:
            warnings_log.append(
                {"step": k + 1, "min_mu": mu_min, "tolerance": tol_pos}
            )

        rho[k + 1] = rho_new
        rho_g[k + 1] = ops.trace_values(rho_new)
        mu[k + 1] = mu_new

    return StateTrajectory(
        times=times.copy(),
        mu=mu,
        rho=rho,
        rho_g=rho_g,
        newton_iterations=iters,
        positivity_warnings=warnings_log,
    )


def free_energy(
    mu: np.ndarray,
    rho: np.ndarray,
    rho_g: np.ndarray,
    u: np.ndarray,
    ps: PotentialSet,
    ops: MeshOperators,
) -> float:
    """Total free energy of one time level: bulk plus surface contributions.

    Includes the coupling term between the chemical potential and the
    order parameter and the work term of the boundary control; gradient
    squares use first differences.  Exported as a diagnostic only; the
    model does not claim monotonicity.
    """
    w = ops.bulk_weights
    bulk_density = (
        ps.convex_bulk.value(rho)
        + ps.smooth_bulk.antiderivative(rho)
        - mu * ps.coupling.value(rho)
    )
    total = float(np.sum(w * bulk_density)) + 0.5 * gradient_inner_bulk(rho, rho, ops)
    wg = ops.boundary_weights
    surf_density = (
        ps.convex_boundary.value(rho_g)
        + ps.smooth_boundary.antiderivative(rho_g)
        - u * rho_g
    )
    total += float(np.sum(wg * surf_density))
    total += 0.5 * gradient_inner_boundary(rho_g, rho_g, ops)
    return total


def lipschitz_probe(
    u1: ControlTrajectory,
    u2: ControlTrajectory,
    init: InitialData,
    ps: PotentialSet,
    ops: MeshOperators,
    opts: SolverOptions = SolverOptions(),
) -> float:
    """Ratio of state-difference energy norms to the control-difference
    L2 norm on the boundary cylinder.

    The continuous stability theory bounds this ratio by a constant; its
    value is not known, so runs of this probe only establish empirical
    boundedness.

    Raises
    ------
    UndefinedRatioError
        If the two controls are nodewise identical.
    """
    if np.array_equal(u1.values, u2.values):
        raise UndefinedRatioError("controls are identical; ratio is undefined")
    s1 = solve_state(init, u1, ps, ops, opts)
    s2 = solve_state(init, u2, ps, ops, opts)
    dt = s1.dt
    numer = (
        energy_norm_bulk(s1.mu - s2.mu, ops, dt)
        + energy_norm_bulk(s1.rho - s2.rho, ops, dt)
        + energy_norm_boundary(s1.rho_g - s2.rho_g, ops, dt)
    )
    du = u1.values - u2.values
    denom = float(np.sqrt(space_time_inner_boundary(du, du, ops, u1.times)))
    return numer / denom
