"""Problem bundles: everything one control run needs, plus builders for
the synthetic problems the verification harness and tests use.

A bundle ties together the mesh operators, the potential set, the initial
data, the time grid, the cost specification, and the admissible box, and
offers the forward/adjoint plumbing the optimizer expects.  The synthetic
builders generate attainable tracking problems whose targets come from a
reference forward solve at a known admissible control, so optimization
results can be judged against a computable benchmark cost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .adjoint import solve_adjoint
from .geometry import Mesh, MeshOperators, assemble_operators, build_mesh
from .objective import AdmissibleBox, CostSpec, cost, reduced_gradient
from .potentials import PotentialSet, logarithmic_default
from .state import ControlTrajectory, InitialData, SolverOptions, StateTrajectory, solve_state

__all__ = [
    "ControlProblem",
    "smooth_initial_data",
    "smooth_reference_control",
    "make_tracking_problem",
    "zero_targets",
    "random_admissible_control",
    "smooth_in_time",
]


@dataclass
class ControlProblem:
    """All ingredients of one boundary-control run."""

    ops: MeshOperators
    ps: PotentialSet
    init: InitialData
    times: np.ndarray
    cost_spec: CostSpec
    box: AdmissibleBox
    solver_opts: SolverOptions = SolverOptions()

    @property
    def mesh(self) -> Mesh:
        return self.ops.mesh

    def zero_control(self) -> ControlTrajectory:
        return ControlTrajectory(
            times=self.times,
            values=np.zeros((self.times.shape[0], self.ops.n_boundary)),
        )

    def constant_control(self, value: float) -> ControlTrajectory:
        return ControlTrajectory(
            times=self.times,
            values=np.full((self.times.shape[0], self.ops.n_boundary), float(value)),
        )

    def solve(self, control: ControlTrajectory) -> StateTrajectory:
        return solve_state(self.init, control, self.ps, self.ops, self.solver_opts)

    def cost_of(self, control: ControlTrajectory, state: StateTrajectory | None = None):
        if state is None:
            state = self.solve(control)
        total, breakdown = cost(state, control, self.cost_spec, self.ops)
        return total, breakdown, state

    def gradient_of(self, control: ControlTrajectory, state: StateTrajectory | None = None):
        if state is None:
            state = self.solve(control)
        adj = solve_adjoint(state, self.cost_spec, self.ps, self.ops, self.solver_opts)
        return reduced_gradient(adj, control, self.cost_spec.weight_control), adj

    def with_cost(self, cost_spec: CostSpec) -> "ControlProblem":
        return replace(self, cost_spec=cost_spec)

    def with_steps(self, steps: int) -> "ControlProblem":
        """Same problem on a refined uniform time grid (targets resampled
        by nearest level; intended for dt-refinement studies on problems
        whose targets are constant in time or regenerated afterwards)."""
        times = np.linspace(self.times[0], self.times[-1], steps + 1)
        idx = np.clip(
            np.round(
                (times - self.times[0]) / (self.times[1] - self.times[0])
            ).astype(int),
            0,
            self.times.shape[0] - 1,
        )
        spec = replace(
            self.cost_spec,
            target_mu=self.cost_spec.target_mu[idx],
            target_rho=self.cost_spec.target_rho[idx],
            target_rho_boundary=self.cost_spec.target_rho_boundary[idx],
        )
        return replace(self, times=times, cost_spec=spec)


def smooth_initial_data(mesh: Mesh, mu_level: float = 0.5, rho_level: float = -0.1,
                        rho_amplitude: float = 0.25) -> InitialData:
    """Nonnegative smooth chemical potential and a well-separated smooth
    order-parameter profile."""
    x = mesh.bulk_nodes[:, 0] / mesh.domain_length
    if mesh.dimension == 1:
        bump = np.cos(np.pi * x)
    else:
        y = mesh.bulk_nodes[:, 1] / mesh.domain_length
        bump = np.cos(np.pi * x) * np.cos(np.pi * y)
    mu0 = mu_level * (1.0 + 0.5 * bump)  # stays >= mu_level/2 > 0
    rho0 = rho_level + rho_amplitude * bump
    return InitialData(mu0=mu0, rho0=rho0)


def smooth_reference_control(times: np.ndarray, mesh: Mesh,
                             amplitude: float = 0.4) -> ControlTrajectory:
    """Smooth admissible control used to manufacture attainable targets."""
    s = np.linspace(0.0, 1.0, mesh.n_boundary if mesh.dimension == 2 else 2)
    t = times / times[-1]
    spatial = np.cos(2.0 * np.pi * s) if mesh.dimension == 2 else np.array([1.0, -0.5])
    temporal = np.sin(np.pi * t) + 0.3
    return ControlTrajectory(
        times=times, values=amplitude * np.outer(temporal, spatial)
    )


def zero_targets(ops: MeshOperators, n_levels: int) -> dict:
    return {
        "target_mu": np.zeros((n_levels, ops.n_bulk)),
        "target_rho": np.zeros((n_levels, ops.n_bulk)),
        "target_rho_boundary": np.zeros((n_levels, ops.n_boundary)),
        "target_terminal": np.zeros(ops.n_bulk),
        "target_terminal_boundary": np.zeros(ops.n_boundary),
    }


def make_tracking_problem(
    dimension: int = 1,
    resolution: int = 33,
    steps: int = 64,
    final_time: float = 0.25,
    weights: tuple = (0.5, 1.0, 1.0, 0.8, 0.8, 1e-2),
    box_bounds: tuple = (-1.0, 1.0),
    norm_cap: float = 50.0,
    reference_control: ControlTrajectory | None = None,
    solver_opts: SolverOptions = SolverOptions(),
) -> tuple[ControlProblem, ControlTrajectory]:
    """Attainable synthetic tracking problem.

    Builds the grid, default logarithmic potentials, smooth initial data,
    and a cost whose targets are the forward trajectories of a known
    admissible reference control.  Returns the problem and that reference
    control; by construction the reference cost is just its control
    penalty, which gives optimizer runs a computable bound to beat.
    """
    mesh = build_mesh(dimension, resolution)
    ops = assemble_operators(mesh)
    ps = logarithmic_default()
    init = smooth_initial_data(mesh)
    times = np.linspace(0.0, final_time, steps + 1)

    if reference_control is None:
        reference_control = smooth_reference_control(times, mesh)
    reference_state = solve_state(init, reference_control, ps, ops, solver_opts)

    w1, w2, w3, w4, w5, w6 = weights
    spec = CostSpec(
        weight_mu=w1,
        weight_rho=w2,
        weight_rho_boundary=w3,
        weight_terminal=w4,
        weight_terminal_boundary=w5,
        weight_control=w6,
        target_mu=reference_state.mu.copy(),
        target_rho=reference_state.rho.copy(),
        target_rho_boundary=reference_state.rho_g.copy(),
        target_terminal=reference_state.rho[-1].copy(),
        target_terminal_boundary=reference_state.rho_g[-1].copy(),
    )
    box = AdmissibleBox(lower=box_bounds[0], upper=box_bounds[1], norm_cap=norm_cap)
    box.validate()
    problem = ControlProblem(
        ops=ops, ps=ps, init=init, times=times, cost_spec=spec, box=box,
        solver_opts=solver_opts,
    )
    return problem, reference_control


def smooth_in_time(values: np.ndarray) -> np.ndarray:
    """One three-point averaging pass along the time axis.

    Keeps seeded random directions comfortably inside the discrete
    H1-in-time space the admissible controls live in.
    """
    values = np.asarray(values, dtype=float)
    out = values.copy()
    if values.shape[0] >= 3:
        out[1:-1] = (values[:-2] + values[1:-1] + values[2:]) / 3.0
        out[0] = (2.0 * values[0] + values[1]) / 3.0
        out[-1] = (2.0 * values[-1] + values[-2]) / 3.0
    return out


def random_admissible_control(
    problem: ControlProblem, rng: np.random.Generator, amplitude: float = 0.5
) -> ControlTrajectory:
    """Seeded random control, smoothed in time and clamped into the box."""
    raw = amplitude * rng.standard_normal(
        (problem.times.shape[0], problem.ops.n_boundary)
    )
    clamped = np.clip(smooth_in_time(raw), problem.box.lower, problem.box.upper)
    return ControlTrajectory(times=problem.times, values=clamped)
