import numpy as np
import pytest
from dataclasses import replace

from chcontrol.errors import AdmissibilityError
from chcontrol.geometry import space_time_inner_boundary
from chcontrol.objective import AdmissibleBox, CostSpec
from chcontrol.optimizer import OptimizerOptions, clamp_box, optimize
from chcontrol.problems import make_tracking_problem, zero_targets


def test_clamp_identity_inside_box():
    box = AdmissibleBox(lower=-1.0, upper=1.0)
    values = np.array([[0.2, -0.8], [0.0, 0.9]])
    assert np.array_equal(clamp_box(values, box), values)


def test_clamp_idempotent_and_saturating():
    box = AdmissibleBox(lower=-0.5, upper=0.5)
    rng = np.random.default_rng(3)
    values = 2.0 * rng.standard_normal((5, 4))
    once = clamp_box(values, box)
    assert np.array_equal(clamp_box(once, box), once)
    assert np.array_equal(clamp_box(values + 10.0, box), np.full_like(values, 0.5))


def test_clamp_is_metric_projection(default_problem):
    # <u - clamp(u), v - clamp(u)> <= 0 for any v in the box.
    problem, _ = default_problem
    box = AdmissibleBox(lower=-0.3, upper=0.3)
    rng = np.random.default_rng(4)
    u = rng.standard_normal((problem.times.shape[0], problem.ops.n_boundary))
    pu = clamp_box(u, box)
    for _ in range(5):
        v = np.clip(rng.standard_normal(u.shape), box.lower, box.upper)
        pairing = space_time_inner_boundary(u - pu, v - pu, problem.ops, problem.times)
        assert pairing <= 1e-12


def test_rejects_infeasible_start(default_problem):
    problem, _ = default_problem
    with pytest.raises(AdmissibilityError):
        optimize(problem.constant_control(5.0), problem)


def _pure_penalty_problem(default_problem, lower, upper):
    problem, _ = default_problem
    spec = CostSpec(
        weight_mu=0.0, weight_rho=0.0, weight_rho_boundary=0.0,
        weight_terminal=0.0, weight_terminal_boundary=0.0, weight_control=1.0,
        **zero_targets(problem.ops, problem.times.shape[0]),
    )
    return replace(
        problem, cost_spec=spec,
        box=AdmissibleBox(lower=lower, upper=upper, norm_cap=100.0),
    )


def test_pure_penalty_converges_to_clamped_zero(default_problem):
    # Quadratic in the control alone: the minimizer is the projection of 0.
    problem = _pure_penalty_problem(default_problem, -1.0, 1.0)
    u0 = problem.constant_control(0.8)
    result = optimize(u0, problem, OptimizerOptions(max_iters=40, step0=1.0, tol_grad=1e-10))
    assert np.abs(result.control.values).max() <= 1e-6
    costs = [row["cost"] for row in result.history]
    assert all(costs[i + 1] <= costs[i] + 1e-18 for i in range(len(costs) - 1))


def test_pure_penalty_with_box_excluding_zero(default_problem):
    problem = _pure_penalty_problem(default_problem, 0.1, 1.0)
    u0 = problem.constant_control(0.7)
    result = optimize(u0, problem, OptimizerOptions(max_iters=60, step0=1.0, tol_vi=1e-10))
    assert np.allclose(result.control.values, 0.1, atol=1e-8)
    assert result.status in ("converged_vi", "converged_gradient")


@pytest.fixture(scope="module")
def attainable_run():
    problem, reference = make_tracking_problem(
        steps=64, weights=(0.0, 0.3, 0.3, 0.0, 0.0, 0.05)
    )
    opts = OptimizerOptions(max_iters=40, step0=20.0, tol_grad=1e-12, tol_vi=1e-9)
    result = optimize(problem.zero_control(), problem, opts)
    return problem, reference, opts, result


def test_attainable_problem_beats_reference_cost(attainable_run):
    problem, reference, _, result = attainable_run
    reference_cost, _, _ = problem.cost_of(reference)
    assert result.cost <= reference_cost


def test_iterates_stay_in_box_and_monotone(attainable_run):
    problem, _, _, result = attainable_run
    assert problem.box.contains(result.control.values)
    costs = [row["cost"] for row in result.history]
    assert all(costs[i + 1] <= costs[i] + 1e-18 for i in range(len(costs) - 1))


def test_armijo_decrease_per_accepted_step(attainable_run):
    _, _, opts, result = attainable_run
    rows = result.history
    for prev, nxt in zip(rows, rows[1:]):
        if prev["step_size"] == prev["step_size"]:  # accepted step (not NaN)
            assert nxt["cost"] <= prev["cost"] - prev["armijo_decrease_bound"] + 1e-15


def test_history_is_complete(attainable_run):
    _, _, _, result = attainable_run
    row = result.history[0]
    for key in (
        "iteration", "cost", "gradient_norm", "projected_gradient_norm",
        "vi_residual", "step_size", "control_norm", "norm_cap", "clamp_admissible",
    ):
        assert key in row


def test_stalled_is_a_status_not_a_crash(attainable_run):
    problem, _, _, _ = attainable_run
    # Absurdly demanding tolerances force a stall eventually; the result
    # must still come back well-formed.
    opts = OptimizerOptions(max_iters=100, step0=20.0, tol_grad=0.0, tol_vi=0.0)
    result = optimize(problem.zero_control(), problem, opts)
    assert result.status in ("stalled", "max_iterations")
    assert np.isfinite(result.cost)
