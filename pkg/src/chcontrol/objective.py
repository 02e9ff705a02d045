"""Tracking cost functional, reduced gradient, and optimality residuals.

The cost is a weighted sum of six quadratic terms: three space-time
tracking misfits (bulk chemical potential, bulk order parameter, boundary
order parameter), two terminal misfits, and the control penalty.  All
space-time inner products use the spatial quadrature weights tensorized
with trapezoid weights in time.

The reduced gradient of the cost with respect to the boundary control is
the boundary adjoint plus the control penalty term; first-order optimality
over the admissible box is certified through the variational-inequality
residual, whose exact minimizer over the box is available nodewise in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ConfigurationError, ContractViolationError
from .geometry import (
    MeshOperators,
    inner_product_boundary,
    inner_product_bulk,
    space_time_inner_boundary,
    space_time_inner_bulk,
    time_weights,
)
from .state import ControlTrajectory, StateTrajectory

__all__ = [
    "CostSpec",
    "AdmissibleBox",
    "cost",
    "reduced_gradient",
    "linearized_cost_derivative",
    "vi_residual",
]

COST_TERMS = (
    "mu_tracking",
    "rho_tracking",
    "boundary_tracking",
    "terminal_bulk",
    "terminal_boundary",
    "control_penalty",
)


@dataclass
class CostSpec:
    """Nonnegative weights and target fields of the tracking cost."""

    weight_mu: float
    weight_rho: float
    weight_rho_boundary: float
    weight_terminal: float
    weight_terminal_boundary: float
    weight_control: float
    target_mu: np.ndarray
    target_rho: np.ndarray
    target_rho_boundary: np.ndarray
    target_terminal: np.ndarray
    target_terminal_boundary: np.ndarray

    @property
    def weights(self) -> tuple:
        return (
            self.weight_mu,
            self.weight_rho,
            self.weight_rho_boundary,
            self.weight_terminal,
            self.weight_terminal_boundary,
            self.weight_control,
        )

    def validate(self, ops: MeshOperators, n_levels: int) -> None:
        if any(w < 0.0 for w in self.weights):
            raise ConfigurationError("(A6) cost weights must be nonnegative")
        shapes = {
            "target_mu": (self.target_mu, (n_levels, ops.n_bulk)),
            "target_rho": (self.target_rho, (n_levels, ops.n_bulk)),
            "target_rho_boundary": (self.target_rho_boundary, (n_levels, ops.n_boundary)),
            "target_terminal": (self.target_terminal, (ops.n_bulk,)),
            "target_terminal_boundary": (self.target_terminal_boundary, (ops.n_boundary,)),
        }
        for name, (arr, want) in shapes.items():
            if np.asarray(arr).shape != want:
                raise ContractViolationError(
                    f"{name} must have shape {want}, got {np.asarray(arr).shape}"
                )


@dataclass
class AdmissibleBox:
    """Pointwise control bounds plus the recorded norm cap.

    The box is the enforced constraint; the norm cap is monitored and
    reported per run, never projected onto.
    """

    lower: float | np.ndarray
    upper: float | np.ndarray
    norm_cap: float = np.inf

    def validate(self) -> None:
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ConfigurationError("(A4) admissible box is empty (lower > upper)")
        if self.norm_cap <= 0.0:
            raise ConfigurationError("(A4) norm cap must be positive")

    def contains(self, values: np.ndarray, tol: float = 1e-12) -> bool:
        values = np.asarray(values)
        return bool(
            np.all(values >= np.asarray(self.lower) - tol)
            and np.all(values <= np.asarray(self.upper) + tol)
        )


def cost(
    state: StateTrajectory,
    control: ControlTrajectory,
    spec: CostSpec,
    ops: MeshOperators,
) -> tuple[float, dict]:
    """Evaluate the cost; returns the total and the six-term breakdown."""
    n_levels = state.times.shape[0]
    spec.validate(ops, n_levels)
    if control.values.shape != (n_levels, ops.n_boundary):
        raise ContractViolationError("control shape does not match the state grid")

    t = state.times
    d_mu = state.mu - spec.target_mu
    d_rho = state.rho - spec.target_rho
    d_rho_g = state.rho_g - spec.target_rho_boundary
    d_final = state.rho[-1] - spec.target_terminal
    d_final_g = state.rho_g[-1] - spec.target_terminal_boundary

    breakdown = {
        "mu_tracking": 0.5 * spec.weight_mu * space_time_inner_bulk(d_mu, d_mu, ops, t),
        "rho_tracking": 0.5 * spec.weight_rho * space_time_inner_bulk(d_rho, d_rho, ops, t),
        "boundary_tracking": 0.5
        * spec.weight_rho_boundary
        * space_time_inner_boundary(d_rho_g, d_rho_g, ops, t),
        "terminal_bulk": 0.5 * spec.weight_terminal * inner_product_bulk(d_final, d_final, ops),
        "terminal_boundary": 0.5
        * spec.weight_terminal_boundary
        * inner_product_boundary(d_final_g, d_final_g, ops),
        "control_penalty": 0.5
        * spec.weight_control
        * space_time_inner_boundary(control.values, control.values, ops, t),
    }
    return float(sum(breakdown.values())), breakdown


def reduced_gradient(adjoint, control: ControlTrajectory, weight_control: float) -> np.ndarray:
    """Reduced cost gradient on the boundary space-time grid.

    ``adjoint`` is any object exposing the boundary adjoint levels as
    ``q_g`` with shape (M+1, N_b), computed at the state of ``control``.
    """
    q_g = np.asarray(adjoint.q_g)
    if q_g.shape != control.values.shape:
        raise ContractViolationError(
            f"adjoint boundary grid {q_g.shape} does not match control "
            f"{control.values.shape}"
        )
    return q_g + weight_control * control.values


def linearized_cost_derivative(
    state: StateTrajectory,
    lin,
    control: ControlTrajectory,
    direction: np.ndarray,
    spec: CostSpec,
    ops: MeshOperators,
) -> float:
    """Directional cost derivative assembled from the linearized state.

    ``lin`` exposes ``eta``, ``zeta``, ``zeta_g``: the directional state
    derivative for ``direction``.  This is the route that bypasses the
    adjoint entirely; comparing it with the adjoint route measures the
    discrete duality gap.
    """
    t = state.times
    total = 0.0
    if spec.weight_mu:
        total += spec.weight_mu * space_time_inner_bulk(
            state.mu - spec.target_mu, lin.eta, ops, t
        )
    if spec.weight_rho:
        total += spec.weight_rho * space_time_inner_bulk(
            state.rho - spec.target_rho, lin.zeta, ops, t
        )
    if spec.weight_rho_boundary:
        total += spec.weight_rho_boundary * space_time_inner_boundary(
            state.rho_g - spec.target_rho_boundary, lin.zeta_g, ops, t
        )
    if spec.weight_terminal:
        total += spec.weight_terminal * inner_product_bulk(
            state.rho[-1] - spec.target_terminal, lin.zeta[-1], ops
        )
    if spec.weight_terminal_boundary:
        total += spec.weight_terminal_boundary * inner_product_boundary(
            state.rho_g[-1] - spec.target_terminal_boundary, lin.zeta_g[-1], ops
        )
    if spec.weight_control:
        total += spec.weight_control * space_time_inner_boundary(
            control.values, np.asarray(direction), ops, t
        )
    return float(total)


def vi_residual(
    gradient: np.ndarray,
    control: ControlTrajectory,
    box: AdmissibleBox,
    ops: MeshOperators,
) -> float:
    """Exact minimum over the box of the pairing of the gradient with
    admissible variations around the control.

    A nonnegative value (up to tolerance) certifies the first-order
    variational inequality.  The minimizer is computed nodewise in closed
    form: the lower bound where the gradient is positive, the upper bound
    where it is negative.

    Raises
    ------
    AdmissibilityError
        If the control itself is outside the box.
    """
    if not box.contains(control.values):
        raise AdmissibilityError("control lies outside the admissible box")
    gradient = np.asarray(gradient)
    if gradient.shape != control.values.shape:
        raise ContractViolationError("gradient and control shapes differ")

    lower = np.broadcast_to(np.asarray(box.lower, dtype=float), gradient.shape)
    upper = np.broadcast_to(np.asarray(box.upper, dtype=float), gradient.shape)
    minimizer = np.where(gradient > 0.0, lower, upper)
    wt = time_weights(control.times)
    pairing = np.einsum(
        "k,kn,n,kn->", wt, gradient, ops.boundary_weights, minimizer - control.values
    )
    return float(pairing)
