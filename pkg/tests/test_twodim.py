"""The solvers are dimension-agnostic; exercise the full chain on a small
square with its boundary ring."""

import numpy as np
import pytest

from chcontrol.geometry import assemble_operators, build_mesh
from chcontrol.objective import AdmissibleBox, CostSpec
from chcontrol.potentials import logarithmic_default
from chcontrol.problems import ControlProblem, smooth_initial_data, zero_targets
from chcontrol.sensitivity import solve_linearized, taylor_remainder
from chcontrol.state import ControlTrajectory


@pytest.fixture(scope="module")
def problem_2d():
    mesh = build_mesh(2, 9, 1.0)
    ops = assemble_operators(mesh)
    ps = logarithmic_default()
    times = np.linspace(0.0, 0.1, 17)
    spec = CostSpec(
        weight_mu=0.5, weight_rho=1.0, weight_rho_boundary=1.0,
        weight_terminal=0.0, weight_terminal_boundary=0.0, weight_control=1e-2,
        **zero_targets(ops, 17),
    )
    return ControlProblem(
        ops=ops, ps=ps, init=smooth_initial_data(mesh), times=times,
        cost_spec=spec, box=AdmissibleBox(lower=-1.0, upper=1.0, norm_cap=100.0),
    )


@pytest.fixture(scope="module")
def control_2d(problem_2d):
    arc = problem_2d.mesh.arc_coordinates
    spatial = 0.3 * np.cos(2 * np.pi * arc / arc.max())
    temporal = np.sin(np.pi * problem_2d.times / problem_2d.times[-1]) + 0.2
    return ControlTrajectory(times=problem_2d.times, values=np.outer(temporal, spatial))


def test_forward_solve_2d(problem_2d, control_2d):
    state = problem_2d.solve(control_2d)
    assert state.separation_margin() >= problem_2d.ps.eps_sep
    assert state.min_mu() >= -1e-8 * max(1.0, float(np.abs(state.mu).max()))
    for k in range(state.times.shape[0]):
        assert np.array_equal(
            state.rho_g[k], state.rho[k][problem_2d.mesh.boundary_index]
        )


def test_taylor_slope_2d(problem_2d, control_2d):
    state = problem_2d.solve(control_2d)
    rng = np.random.default_rng(42)
    h = rng.standard_normal(control_2d.values.shape)
    report = taylor_remainder(
        problem_2d.init, control_2d, h, (0.2, 0.1, 0.05), problem_2d.ps, problem_2d.ops
    )
    assert 1.7 <= report.slope <= 2.3


def test_gradient_consistency_2d(problem_2d, control_2d):
    from chcontrol.geometry import space_time_inner_boundary
    from chcontrol.objective import linearized_cost_derivative

    state = problem_2d.solve(control_2d)
    grad, _ = problem_2d.gradient_of(control_2d, state)
    rng = np.random.default_rng(7)
    h = rng.standard_normal(control_2d.values.shape)
    adjoint_route = space_time_inner_boundary(
        grad, h, problem_2d.ops, problem_2d.times
    )
    lin = solve_linearized(state, control_2d.copy_with(h), problem_2d.ps, problem_2d.ops)
    linearized_route = linearized_cost_derivative(
        state, lin, control_2d, h, problem_2d.cost_spec, problem_2d.ops
    )
    assert adjoint_route == pytest.approx(linearized_route, rel=5e-2)
