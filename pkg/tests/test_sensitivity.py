import numpy as np
import pytest

from chcontrol.errors import AdmissibilityError, ContractViolationError
from chcontrol.objective import AdmissibleBox
from chcontrol.problems import smooth_in_time
from chcontrol.sensitivity import solve_linearized, state_difference_norm, taylor_remainder


def _direction(problem, seed, amplitude=1.0):
    rng = np.random.default_rng(seed)
    raw = amplitude * rng.standard_normal(
        (problem.times.shape[0], problem.ops.n_boundary)
    )
    return smooth_in_time(raw)


def test_zero_direction_gives_zero(default_problem, default_base):
    problem, _ = default_problem
    base, state = default_base
    lin = solve_linearized(
        state, base.copy_with(np.zeros_like(base.values)), problem.ps, problem.ops
    )
    assert np.all(lin.eta == 0.0)
    assert np.all(lin.zeta == 0.0)
    assert np.all(lin.zeta_g == 0.0)


def test_superposition_and_scaling(default_problem, default_base):
    problem, _ = default_problem
    base, state = default_base
    for seed in range(5):
        h1 = _direction(problem, 100 + seed)
        h2 = _direction(problem, 200 + seed)
        l1 = solve_linearized(state, base.copy_with(h1), problem.ps, problem.ops)
        l2 = solve_linearized(state, base.copy_with(h2), problem.ps, problem.ops)
        l_sum = solve_linearized(state, base.copy_with(h1 + h2), problem.ps, problem.ops)
        l_scaled = solve_linearized(state, base.copy_with(2.5 * h1), problem.ps, problem.ops)
        for got, want in (
            (l_sum.zeta, l1.zeta + l2.zeta),
            (l_sum.eta, l1.eta + l2.eta),
            (l_scaled.zeta, 2.5 * l1.zeta),
            (l_scaled.eta, 2.5 * l1.eta),
        ):
            scale = max(np.abs(want).max(), 1e-30)
            assert np.abs(got - want).max() / scale <= 1e-8


def test_trace_compatibility_exact(default_problem, default_base):
    problem, _ = default_problem
    base, state = default_base
    lin = solve_linearized(
        state, base.copy_with(_direction(problem, 5)), problem.ps, problem.ops
    )
    for k in range(state.times.shape[0]):
        assert np.array_equal(
            lin.zeta_g[k], lin.zeta[k][problem.mesh.boundary_index]
        )
    assert np.all(lin.eta[0] == 0.0) and np.all(lin.zeta[0] == 0.0)


def test_matches_forward_differencing(default_problem, default_base):
    # (S(u + eps h) - S(u)) / eps approaches the linearized solution at
    # first order in eps.
    problem, _ = default_problem
    base, state = default_base
    h = _direction(problem, 6, amplitude=0.5)
    lin = solve_linearized(state, base.copy_with(h), problem.ps, problem.ops)
    gaps = []
    for eps in (0.2, 0.1):
        perturbed = problem.solve(base.copy_with(base.values + eps * h))
        diff_rho = (perturbed.rho - state.rho) / eps
        gaps.append(np.abs(diff_rho - lin.zeta).max())
    assert gaps[0] > gaps[1]
    assert gaps[0] / gaps[1] == pytest.approx(2.0, abs=0.5)


def test_grid_mismatch_rejected(default_problem, default_base):
    problem, _ = default_problem
    base, state = default_base
    from chcontrol.state import ControlTrajectory

    bad = ControlTrajectory(
        times=state.times[:-1], values=np.zeros((state.times.shape[0] - 1, 2))
    )
    with pytest.raises(ContractViolationError):
        solve_linearized(state, bad, problem.ps, problem.ops)


def test_taylor_zero_direction(default_problem):
    problem, _ = default_problem
    base = problem.zero_control()
    report = taylor_remainder(
        problem.init, base, np.zeros_like(base.values), (0.2, 0.1),
        problem.ps, problem.ops,
    )
    assert np.all(report.remainders == 0.0)
    assert np.isnan(report.slope)


def test_taylor_quadratic_slope(default_problem, default_base):
    problem, _ = default_problem
    base, _ = default_base
    h = _direction(problem, 7)
    report = taylor_remainder(
        problem.init, base, h, (0.2, 0.1, 0.05, 0.025), problem.ps, problem.ops
    )
    assert 1.7 <= report.slope <= 2.3
    assert report.fit_residual < 0.1
    assert np.all(np.diff(report.remainders) < 0)


def test_taylor_rejects_inadmissible_scales(default_problem):
    problem, _ = default_problem
    base = problem.constant_control(0.9)
    h = np.ones_like(base.values)
    box = AdmissibleBox(lower=-1.0, upper=1.0)
    with pytest.raises(AdmissibilityError):
        taylor_remainder(
            problem.init, base, h, (0.5,), problem.ps, problem.ops, box=box
        )


def test_state_difference_norm_positive_definite(default_problem, default_base):
    problem, _ = default_problem
    _, state = default_base
    zero = np.zeros_like(state.mu)
    zero_g = np.zeros_like(state.rho_g)
    assert state_difference_norm(zero, zero, zero_g, problem.ops, state.times) == 0.0
    assert (
        state_difference_norm(state.mu, state.rho, state.rho_g, problem.ops, state.times)
        > 0.0
    )
