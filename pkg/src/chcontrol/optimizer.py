"""Projected gradient descent over the admissible box with Armijo
backtracking on the reduced cost.

Each iteration clamps a gradient step back into the box and accepts it
when the cost decreases by the Armijo fraction of the squared projected
step.  Termination happens on a small projected-gradient norm, on a
variational-inequality residual certifying first-order optimality, on the
iteration budget, or on a stalled line search (reported as a status, not
an error).  The gradient is used in the raw boundary-cylinder metric; no
preconditioning is applied by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError
from .geometry import space_time_inner_boundary
from .objective import AdmissibleBox, cost, vi_residual
from .state import ControlTrajectory

__all__ = ["OptimizerOptions", "OptimizeResult", "clamp_box", "optimize"]


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 100
    armijo_c: float = 1e-4
    shrink: float = 0.5
    step0: float = 1.0
    tol_grad: float = 1e-8
    tol_vi: float = 1e-10
    max_backtracks: int = 30


@dataclass
class OptimizeResult:
    control: ControlTrajectory
    state: object
    gradient: np.ndarray
    cost: float
    breakdown: dict
    status: str
    iterations: int
    history: list = field(default_factory=list)
    vi_residual: float = float("nan")
    projection_point: np.ndarray | None = None
    adjoint: object | None = None


def clamp_box(u, box: AdmissibleBox):
    """Nodewise projection onto the box (the pointwise median).

    Accepts a control trajectory or a bare array and returns the same
    kind.  Idempotent; this is the metric projection in the boundary
    cylinder norm.
    """
    if isinstance(u, ControlTrajectory):
        return u.copy_with(np.clip(u.values, box.lower, box.upper))
    return np.clip(np.asarray(u, dtype=float), box.lower, box.upper)


def optimize(
    u0: ControlTrajectory,
    problem,
    opts: OptimizerOptions = OptimizerOptions(),
) -> OptimizeResult:
    """Minimize the reduced cost starting from an admissible control.

    ``problem`` is a control problem bundle exposing ``solve``,
    ``cost_of``, ``gradient_of``, ``box``, ``ops`` and
    ``control_norm`` (see :mod:`chcontrol.problems`).

    The history records, per accepted iterate, the cost, gradient norms,
    accepted step size, variational-inequality residual, the control-space
    norm against the recorded cap, and whether the clamped gradient
    fixed point is itself admissible for that cap.
    """
    box = problem.box
    ops = problem.ops
    if not box.contains(u0.values):
        raise AdmissibilityError("starting control is outside the admissible box")

    u = u0.copy_with(u0.values.copy())
    state = problem.solve(u)
    J, breakdown = cost(state, u, problem.cost_spec, ops)

    history: list[dict] = []
    status = "max_iterations"
    grad = np.zeros_like(u.values)
    vi = float("nan")
    projection_point = None
    adjoint = None
    iteration = 0

    for iteration in range(opts.max_iters + 1):
        grad, adjoint = problem.gradient_of(u, state)
        grad_norm = np.sqrt(space_time_inner_boundary(grad, grad, ops, u.times))
        pg = u.values - clamp_box(u.values - grad, box)
        pg_norm = np.sqrt(space_time_inner_boundary(pg, pg, ops, u.times))
        vi = vi_residual(grad, u, box, ops)

        control_norm = u.h1_linf_norm(ops)
        if problem.cost_spec.weight_control > 0.0:
            projection_point = clamp_box(
                -adjoint.q_g / problem.cost_spec.weight_control, box
            )
            clamp_norm = u.copy_with(projection_point).h1_linf_norm(ops)
            clamp_admissible = bool(clamp_norm <= box.norm_cap)
        else:
            projection_point = None
            clamp_admissible = False

        row = {
            "iteration": iteration,
            "cost": J,
            "gradient_norm": float(grad_norm),
            "projected_gradient_norm": float(pg_norm),
            "vi_residual": float(vi),
            "step_size": float("nan"),
            "armijo_decrease_bound": float("nan"),
            "control_norm": float(control_norm),
            "norm_cap": float(box.norm_cap),
            "clamp_admissible": clamp_admissible,
        }
        row.update({f"cost_{name}": float(value) for name, value in breakdown.items()})
        history.append(row)

        if pg_norm <= opts.tol_grad:
            status = "converged_gradient"
            break
        if vi >= -opts.tol_vi:
            status = "converged_vi"
            break
        if iteration == opts.max_iters:
            status = "max_iterations"
            break

        step = opts.step0
        accepted = False
        for _ in range(opts.max_backtracks):
            trial_values = clamp_box(u.values - step * grad, box)
            diff = u.values - trial_values
            if not np.any(diff):
                break  # projection absorbed the whole step
            mapping_sq = space_time_inner_boundary(diff, diff, ops, u.times) / step**2
            trial = u.copy_with(trial_values)
            trial_state = problem.solve(trial)
            J_trial, breakdown_trial = cost(trial_state, trial, problem.cost_spec, ops)
            if J_trial <= J - opts.armijo_c * step * mapping_sq:
                u, state = trial, trial_state
                J, breakdown = J_trial, breakdown_trial
                history[-1]["step_size"] = float(step)
                history[-1]["armijo_decrease_bound"] = float(
                    opts.armijo_c * step * mapping_sq
                )
                accepted = True
                break
            step *= opts.shrink

        if not accepted:
            status = "stalled"
            break

    return OptimizeResult(
        control=u,
        state=state,
        gradient=grad,
        cost=J,
        breakdown=breakdown,
        status=status,
        iterations=iteration,
        history=history,
        vi_residual=vi,
        projection_point=projection_point,
        adjoint=adjoint,
    )
