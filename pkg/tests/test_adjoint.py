import numpy as np
import pytest
from dataclasses import replace

from chcontrol.adjoint import check_compatibility_A7, solve_adjoint
from chcontrol.errors import TerminalCompatibilityError
from chcontrol.geometry import space_time_inner_boundary
from chcontrol.objective import CostSpec, linearized_cost_derivative
from chcontrol.problems import make_tracking_problem, zero_targets
from chcontrol.sensitivity import solve_linearized


def _spec_with(problem, **weights):
    defaults = dict(
        weight_mu=0.0, weight_rho=0.0, weight_rho_boundary=0.0,
        weight_terminal=0.0, weight_terminal_boundary=0.0, weight_control=0.0,
    )
    defaults.update(weights)
    return CostSpec(
        **defaults, **zero_targets(problem.ops, problem.times.shape[0])
    )


def test_a7_trivial_when_terminal_weights_vanish(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    spec = _spec_with(problem)
    report = check_compatibility_A7(spec, state.rho[-1], state.rho_g[-1], problem.ops)
    assert report.passed and report.max_mismatch == 0.0


def test_a7_passes_with_matched_terminal_targets(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    spec = replace(
        problem.cost_spec, weight_terminal=1.0, weight_terminal_boundary=1.0
    )
    # targets come from a reference trajectory, so the boundary target is
    # the trace of the bulk target and the mismatch vanishes identically
    report = check_compatibility_A7(spec, state.rho[-1], state.rho_g[-1], problem.ops)
    assert report.passed
    assert report.max_mismatch <= 1e-10


def test_a7_fails_on_mismatched_weights(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    spec = _spec_with(problem, weight_terminal=1.0, weight_terminal_boundary=0.0)
    report = check_compatibility_A7(spec, state.rho[-1], state.rho_g[-1], problem.ops)
    assert not report.passed
    assert report.max_mismatch > 0.0
    with pytest.raises(TerminalCompatibilityError):
        solve_adjoint(state, spec, problem.ps, problem.ops)


def test_zero_weights_give_zero_adjoint(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    adj = solve_adjoint(state, _spec_with(problem), problem.ps, problem.ops)
    assert np.all(adj.p == 0.0)
    assert np.all(adj.q == 0.0)
    assert np.all(adj.q_g == 0.0)


def test_zero_sources_when_targets_match_state(default_problem, default_base):
    # Tracking weight on the chemical potential only, with targets equal to
    # the solved trajectory: all adjoint sources vanish.
    problem, _ = default_problem
    _, state = default_base
    spec = replace(
        _spec_with(problem, weight_mu=1.0), target_mu=state.mu.copy()
    )
    adj = solve_adjoint(state, spec, problem.ps, problem.ops)
    assert np.abs(adj.p).max() == 0.0
    assert np.abs(adj.q).max() == 0.0


def test_terminal_conditions_exact(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    spec = replace(
        problem.cost_spec, weight_terminal=0.7, weight_terminal_boundary=0.7
    )
    adj = solve_adjoint(state, spec, problem.ps, problem.ops)
    expected_q = 0.7 * (state.rho[-1] - spec.target_terminal)
    assert np.array_equal(adj.q[-1], expected_q)
    assert np.array_equal(adj.q_g[-1], expected_q[problem.mesh.boundary_index])
    assert np.all(adj.p[-1] == 0.0)


def test_linearity_in_mismatch_weights(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    spec1 = replace(problem.cost_spec, weight_control=0.0)
    spec2 = replace(
        spec1,
        weight_mu=2 * spec1.weight_mu,
        weight_rho=2 * spec1.weight_rho,
        weight_rho_boundary=2 * spec1.weight_rho_boundary,
        weight_terminal=2 * spec1.weight_terminal,
        weight_terminal_boundary=2 * spec1.weight_terminal_boundary,
    )
    a1 = solve_adjoint(state, spec1, problem.ps, problem.ops)
    a2 = solve_adjoint(state, spec2, problem.ps, problem.ops)
    scale = max(np.abs(a2.q).max(), 1e-30)
    assert np.abs(a2.q - 2.0 * a1.q).max() / scale <= 1e-10
    assert np.abs(a2.p - 2.0 * a1.p).max() / max(np.abs(a2.p).max(), 1e-30) <= 1e-10


def test_duality_gap_shrinks_under_dt_refinement():
    # Identity check: the beta-weighted pairings of the linearized state
    # equal the boundary pairing of the adjoint with the direction, up to a
    # discretization gap of first order in dt.  Oracle: linearized solve.
    gaps = []
    for steps in (24, 48, 96):
        problem, _ = make_tracking_problem(
            resolution=17, steps=steps, weights=(0.5, 1.0, 1.0, 0.8, 0.8, 0.0)
        )
        base = problem.zero_control()
        state = problem.solve(base)
        adj = solve_adjoint(state, problem.cost_spec, problem.ps, problem.ops)

        t = problem.times / problem.times[-1]
        h = np.outer(np.sin(np.pi * t) + 0.4, [1.0, -0.6])
        lin = solve_linearized(state, base.copy_with(h), problem.ps, problem.ops)
        lhs = linearized_cost_derivative(
            state, lin, base, h, problem.cost_spec, problem.ops
        )
        rhs = space_time_inner_boundary(adj.q_g, h, problem.ops, problem.times)
        gaps.append(abs(lhs - rhs))
    assert gaps[0] / gaps[1] >= 1.5
    assert gaps[1] / gaps[2] >= 1.5
