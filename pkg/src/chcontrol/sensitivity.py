"""Linearized solver: the directional derivative of the control-to-state map.

The linearized system is advanced with the same two-stage, time-lagged
decoupling as the forward solver: the linearized order parameter advances
through the shared linear bulk/surface step with the linearized chemical
potential lagged by one level in its source, then the linearized chemical
potential advances implicitly with the fresh values.  With the base-state
rates taken as backward differences, each stage is the exact derivative of
the corresponding forward stage, so the whole march is the exact
derivative of the discrete forward map up to solver tolerances.  That is
what makes the quadratic Taylor remainder observable in clean form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from .errors import AdmissibilityError, ContractViolationError, LinearSolveError
from .geometry import MeshOperators, gradient_inner_bulk, time_weights
from .parabolic import LinearStepProblem, linear_step
from .potentials import PotentialSet
from .state import ControlTrajectory, InitialData, SolverOptions, StateTrajectory, solve_state

__all__ = [
    "SensitivityTrajectory",
    "solve_linearized",
    "TaylorReport",
    "taylor_remainder",
    "state_difference_norm",
]


@dataclass
class SensitivityTrajectory:
    """Directional state derivative: linearized potential, order parameter,
    and boundary trace, all vanishing at the initial time."""

    times: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    zeta_g: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def solve_linearized(
    base: StateTrajectory,
    direction: ControlTrajectory,
    ps: PotentialSet,
    ops: MeshOperators,
    opts: SolverOptions = SolverOptions(),
) -> SensitivityTrajectory:
    """Solve the linearized system at a base state for one perturbation.

    ``direction`` lives on the base trajectory's time grid.  Linearity and
    zero-input/zero-output hold to linear-solver tolerance.
    """
    if direction.values.shape != (base.times.shape[0], ops.n_boundary):
        raise ContractViolationError(
            "perturbation must match the base trajectory's boundary grid"
        )
    if not np.allclose(direction.times, base.times, rtol=0.0, atol=1e-14):
        raise ContractViolationError("perturbation time grid differs from base grid")

    M = base.n_steps
    dt = base.dt
    eta = np.zeros((M + 1, ops.n_bulk))
    zeta = np.zeros((M + 1, ops.n_bulk))
    zeta_g = np.zeros((M + 1, ops.n_boundary))

    for k in range(M):
        rho_new = base.rho[k + 1]
        rho_g_new = base.rho_g[k + 1]
        mu_old = base.mu[k]
        mu_new = base.mu[k + 1]
        drho_dt = (base.rho[k + 1] - base.rho[k]) / dt
        dmu_dt = (base.mu[k + 1] - base.mu[k]) / dt

        # Stage 1: linearized order parameter; the linearized potential
        # enters lagged, exactly as the forward stage froze the potential.
        problem = LinearStepProblem(
            reaction_bulk=(
                ps.convex_bulk.d2(rho_new)
                + ps.smooth_bulk.d1(rho_new)
                - mu_old * ps.coupling.d2(rho_new)
            ),
            reaction_boundary=(
                ps.convex_boundary.d2(rho_g_new) + ps.smooth_boundary.d1(rho_g_new)
            ),
            source_bulk=ps.coupling.d1(rho_new) * eta[k],
            source_boundary=0.5 * (direction.values[k] + direction.values[k + 1]),
            dt=dt,
            previous_bulk=zeta[k],
            previous_boundary=zeta_g[k],
        )
        zeta[k + 1], zeta_g[k + 1] = linear_step(problem, ops)

        # Stage 2: linearized chemical potential with the fresh values.
        g = ps.coupling.value(rho_new)
        gp = ps.coupling.d1(rho_new)
        gpp = ps.coupling.d2(rho_new)
        capacity = 1.0 + 2.0 * g
        dzeta_dt = (zeta[k + 1] - zeta[k]) / dt
        A = (sps.diags(capacity / dt + gp * drho_dt) - ops.laplacian_bulk).tocsc()
        rhs = (
            capacity / dt * eta[k]
            - 2.0 * gp * dmu_dt * zeta[k + 1]
            - mu_new * gpp * drho_dt * zeta[k + 1]
            - mu_new * gp * dzeta_dt
        )
        eta_new = spsolve(A, rhs)
        if not np.all(np.isfinite(eta_new)):
            raise LinearSolveError(
                f"linearized potential solve failed at time step {k}"
            )
        eta[k + 1] = eta_new

    return SensitivityTrajectory(times=base.times.copy(), eta=eta, zeta=zeta, zeta_g=zeta_g)


def state_difference_norm(
    dmu: np.ndarray,
    drho: np.ndarray,
    drho_g: np.ndarray,
    ops: MeshOperators,
    times: np.ndarray,
) -> float:
    """Discrete norm of a state-shaped triple in the differentiability space.

    The potential component carries max-in-time L2 plus L2-in-time H1; the
    order-parameter components carry the time-derivative L2 norm plus the
    L2-in-time discrete-Laplacian norm.
    """
    dt = float(times[1] - times[0])
    wt = time_weights(times)
    wb = ops.bulk_weights
    wg = ops.boundary_weights

    z_max_sq = max(float(np.sum(wb * dmu[k] ** 2)) for k in range(dmu.shape[0]))
    z_v_sq = sum(
        wt[k] * (float(np.sum(wb * dmu[k] ** 2)) + gradient_inner_bulk(dmu[k], dmu[k], ops))
        for k in range(dmu.shape[0])
    )
    z_part = np.sqrt(z_max_sq + z_v_sq)

    dyq = np.diff(drho, axis=0) / dt
    y_t_sq = dt * float(np.einsum("kn,n,kn->", dyq, wb, dyq))
    lap = (ops.laplacian_bulk @ drho.T).T
    y_l_sq = float(np.einsum("k,kn,n,kn->", wt, lap, wb, lap))
    y_part = np.sqrt(y_t_sq + y_l_sq)

    dgq = np.diff(drho_g, axis=0) / dt
    g_t_sq = dt * float(np.einsum("kn,n,kn->", dgq, wg, dgq))
    lap_g = (ops.laplacian_boundary @ drho_g.T).T
    g_l_sq = float(np.einsum("k,kn,n,kn->", wt, lap_g, wg, lap_g))
    g_part = np.sqrt(g_t_sq + g_l_sq)

    return float(z_part + y_part + g_part)


@dataclass
class TaylorReport:
    """Remainder norms per scale with the fitted log-log slope."""

    scales: np.ndarray
    remainders: np.ndarray
    slope: float
    fit_residual: float

    def as_dict(self) -> dict:
        return {
            "scales": self.scales.tolist(),
            "remainders": self.remainders.tolist(),
            "slope": self.slope,
            "fit_residual": self.fit_residual,
        }


def taylor_remainder(
    init: InitialData,
    base_control: ControlTrajectory,
    direction: np.ndarray,
    scales,
    ps: PotentialSet,
    ops: MeshOperators,
    opts: SolverOptions = SolverOptions(),
    box=None,
) -> TaylorReport:
    """Remainder of the first-order expansion of the state map.

    For each scale the perturbed forward solution is compared against the
    base solution plus the scaled directional derivative; the quadratic
    remainder bound predicts a log-log slope of 2.

    Raises
    ------
    AdmissibilityError
        If a box is supplied and a perturbed control leaves it.
    """
    scales = np.asarray(list(scales), dtype=float)
    direction = np.asarray(direction, dtype=float)
    if box is not None:
        for eps in scales:
            perturbed = base_control.values + eps * direction
            if np.any(perturbed < box.lower - 1e-14) or np.any(perturbed > box.upper + 1e-14):
                raise AdmissibilityError(
                    f"perturbed control at scale {eps:g} leaves the admissible box"
                )

    base_state = solve_state(init, base_control, ps, ops, opts)
    lin = solve_linearized(
        base_state, base_control.copy_with(direction), ps, ops, opts
    )

    remainders = np.empty_like(scales)
    for i, eps in enumerate(scales):
        perturbed = solve_state(
            init, base_control.copy_with(base_control.values + eps * direction),
            ps, ops, opts,
        )
        remainders[i] = state_difference_norm(
            perturbed.mu - base_state.mu - eps * lin.eta,
            perturbed.rho - base_state.rho - eps * lin.zeta,
            perturbed.rho_g - base_state.rho_g - eps * lin.zeta_g,
            ops,
            base_state.times,
        )

    if np.all(remainders > 0.0) and scales.size >= 2:
        log_eps = np.log(scales)
        log_r = np.log(remainders)
        coeffs, res, *_ = np.polyfit(log_eps, log_r, 1, full=True)
        slope = float(coeffs[0])
        fit_residual = float(res[0]) if len(res) else 0.0
    else:
        slope, fit_residual = float("nan"), float("nan")

    return TaylorReport(
        scales=scales, remainders=remainders, slope=slope, fit_residual=fit_residual
    )
