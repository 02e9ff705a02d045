"""Named verification probes for the theory-backed claims.

Each probe is deterministic given its seed, returns a report object with
a ``passed`` flag and JSON-ready details, and owns its solvers.  The four
probes check, in order: consistency of the three routes to the cost
derivative (adjoint, linearized, finite differences), the quadratic Taylor
remainder of the state map, empirical boundedness of the control-to-state
Lipschitz ratio, and the runtime invariants of the forward solver
(separation, exact traces, sign of the chemical potential, finite energy)
together with rejection of data violating the standing assumptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConfigurationError
from .geometry import space_time_inner_boundary
from .objective import cost, linearized_cost_derivative
from .problems import ControlProblem, random_admissible_control, smooth_in_time
from .sensitivity import solve_linearized, taylor_remainder
from .state import ControlTrajectory, InitialData, free_energy, lipschitz_probe

__all__ = [
    "GradientCheckReport",
    "TaylorTestReport",
    "StabilityProbeReport",
    "InvariantSuiteReport",
    "run_gradient_check",
    "run_taylor_test",
    "run_stability_probe",
    "run_invariant_suite",
]


def _random_direction(problem: ControlProblem, rng: np.random.Generator,
                      amplitude: float = 1.0) -> np.ndarray:
    raw = amplitude * rng.standard_normal(
        (problem.times.shape[0], problem.ops.n_boundary)
    )
    return smooth_in_time(raw)


@dataclass
class GradientCheckReport:
    seed: int
    directions: list = field(default_factory=list)
    passed: bool = False
    tol_adjoint_vs_linearized: float = 5e-2
    tol_adjoint_vs_fd: float = 1e-2

    def as_dict(self) -> dict:
        return {
            "check": "gradient",
            "seed": self.seed,
            "passed": self.passed,
            "tol_adjoint_vs_linearized": self.tol_adjoint_vs_linearized,
            "tol_adjoint_vs_fd": self.tol_adjoint_vs_fd,
            "directions": self.directions,
        }


def run_gradient_check(
    problem: ControlProblem,
    base_control: ControlTrajectory | None = None,
    directions: int = 3,
    epsilons=(2e-2, 1e-2, 5e-3),
    seed: int = 0,
    tol_adjoint_vs_linearized: float = 5e-2,
    tol_adjoint_vs_fd: float = 1e-2,
) -> GradientCheckReport:
    """Compare adjoint-route, linearized-route, and central-difference
    directional derivatives of the reduced cost.

    The adjoint/linearized gap is the discrete duality gap; the
    finite-difference comparison is evaluated at each scale and judged at
    the best one (the sweet spot between truncation and cancellation).
    """
    rng = np.random.default_rng(seed)
    if base_control is None:
        base_control = random_admissible_control(problem, rng, amplitude=0.3)
    state = problem.solve(base_control)
    grad, _ = problem.gradient_of(base_control, state)
    J0, _, _ = problem.cost_of(base_control, state)

    report = GradientCheckReport(
        seed=seed,
        tol_adjoint_vs_linearized=tol_adjoint_vs_linearized,
        tol_adjoint_vs_fd=tol_adjoint_vs_fd,
    )
    all_ok = True
    for _ in range(directions):
        h = _random_direction(problem, rng)
        adjoint_route = space_time_inner_boundary(grad, h, problem.ops, problem.times)
        lin = solve_linearized(
            state, base_control.copy_with(h), problem.ps, problem.ops,
            problem.solver_opts,
        )
        linearized_route = linearized_cost_derivative(
            state, lin, base_control, h, problem.cost_spec, problem.ops
        )

        fd_values = []
        for eps in epsilons:
            plus, _, _ = problem.cost_of(
                base_control.copy_with(base_control.values + eps * h)
            )
            minus, _, _ = problem.cost_of(
                base_control.copy_with(base_control.values - eps * h)
            )
            fd_values.append((plus - minus) / (2.0 * eps))

        scale = max(abs(linearized_route), 1e-14)
        gap_lin = abs(adjoint_route - linearized_route) / scale
        gaps_fd = [
            abs(adjoint_route - fd) / max(abs(fd), 1e-14) for fd in fd_values
        ]
        entry = {
            "adjoint_route": adjoint_route,
            "linearized_route": linearized_route,
            "fd_values": fd_values,
            "epsilons": list(epsilons),
            "rel_gap_adjoint_vs_linearized": gap_lin,
            "rel_gap_adjoint_vs_fd": min(gaps_fd),
            "cost_at_base": J0,
        }
        report.directions.append(entry)
        if gap_lin > tol_adjoint_vs_linearized or min(gaps_fd) > tol_adjoint_vs_fd:
            all_ok = False
    report.passed = all_ok
    return report


@dataclass
class TaylorTestReport:
    seed: int
    slope_bracket: tuple
    directions: list = field(default_factory=list)
    passed: bool = False

    def as_dict(self) -> dict:
        return {
            "check": "taylor",
            "seed": self.seed,
            "passed": self.passed,
            "slope_bracket": list(self.slope_bracket),
            "directions": self.directions,
        }


def run_taylor_test(
    problem: ControlProblem,
    base_control: ControlTrajectory | None = None,
    directions: int = 3,
    scales=(0.2, 0.1, 0.05, 0.025),
    seed: int = 0,
    slope_bracket: tuple = (1.7, 2.3),
) -> TaylorTestReport:
    """Quadratic-remainder test of the state map along seeded directions."""
    rng = np.random.default_rng(seed)
    if base_control is None:
        base_control = random_admissible_control(problem, rng, amplitude=0.2)
    report = TaylorTestReport(seed=seed, slope_bracket=slope_bracket)
    lo, hi = slope_bracket
    all_ok = True
    for _ in range(directions):
        h = _random_direction(problem, rng)
        tr = taylor_remainder(
            problem.init, base_control, h, scales, problem.ps, problem.ops,
            problem.solver_opts,
        )
        report.directions.append(tr.as_dict())
        if not (lo <= tr.slope <= hi):
            all_ok = False
    report.passed = all_ok
    return report


@dataclass
class StabilityProbeReport:
    seed: int
    ratios: list = field(default_factory=list)
    median: float = float("nan")
    spread_factor: float = 10.0
    passed: bool = False

    def as_dict(self) -> dict:
        return {
            "check": "stability",
            "seed": self.seed,
            "passed": self.passed,
            "ratios": self.ratios,
            "median": self.median,
            "spread_factor": self.spread_factor,
        }


def run_stability_probe(
    problem: ControlProblem,
    pairs: int = 20,
    seed: int = 0,
    spread_factor: float = 10.0,
) -> StabilityProbeReport:
    """Lipschitz ratios of the state map over random admissible control
    pairs: all must be finite and within the spread factor of the median."""
    rng = np.random.default_rng(seed)
    report = StabilityProbeReport(seed=seed, spread_factor=spread_factor)
    for _ in range(pairs):
        u1 = random_admissible_control(problem, rng, amplitude=0.4)
        u2 = random_admissible_control(problem, rng, amplitude=0.4)
        ratio = lipschitz_probe(
            u1, u2, problem.init, problem.ps, problem.ops, problem.solver_opts
        )
        report.ratios.append(float(ratio))
    ratios = np.asarray(report.ratios)
    report.median = float(np.median(ratios))
    report.passed = bool(
        np.all(np.isfinite(ratios))
        and np.max(ratios) <= spread_factor * report.median
        and np.min(ratios) >= report.median / spread_factor
    )
    return report


@dataclass
class InvariantSuiteReport:
    seed: int
    entries: list = field(default_factory=list)
    passed: bool = False

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.entries.append({"name": name, "passed": bool(passed), "detail": detail})

    def as_dict(self) -> dict:
        return {
            "check": "invariants",
            "seed": self.seed,
            "passed": self.passed,
            "entries": self.entries,
        }


def run_invariant_suite(problem: ControlProblem, seed: int = 0) -> InvariantSuiteReport:
    """Forward-solve invariants plus rejection of assumption-violating data."""
    rng = np.random.default_rng(seed)
    report = InvariantSuiteReport(seed=seed)

    control = random_admissible_control(problem, rng, amplitude=0.4)
    state = problem.solve(control)

    margin = state.separation_margin()
    report.add(
        "separation",
        margin >= problem.ps.eps_sep,
        f"margin {margin:.3e} vs eps_sep {problem.ps.eps_sep:g}",
    )
    traces_exact = all(
        np.array_equal(state.rho_g[k], problem.ops.trace_values(state.rho[k]))
        for k in range(state.times.shape[0])
    )
    report.add("trace_compatibility", traces_exact, "exact nodewise equality")
    tol_pos = 1e-8 * max(1.0, float(np.max(np.abs(state.mu))))
    report.add(
        "mu_positivity",
        state.min_mu() >= -tol_pos,
        f"min {state.min_mu():.3e} vs -{tol_pos:.3e}",
    )
    energies = [
        free_energy(state.mu[k], state.rho[k], state.rho_g[k], control.values[k],
                    problem.ps, problem.ops)
        for k in range(state.times.shape[0])
    ]
    report.add(
        "energy_finite",
        bool(np.all(np.isfinite(energies))),
        f"range [{min(energies):.3e}, {max(energies):.3e}]",
    )

    # Negative checks: invalid data must be rejected before any solve.
    try:
        bad = InitialData(
            mu0=np.zeros(problem.ops.n_bulk),
            rho0=np.full(problem.ops.n_bulk, 1.0 - 0.1 * problem.ps.eps_sep),
        )
        bad.validate(problem.ops, problem.ps.eps_sep)
        report.add("rejects_bad_initial_margin", False, "no rejection raised")
    except ConfigurationError as exc:
        report.add("rejects_bad_initial_margin", True, str(exc))

    outside = problem.constant_control(float(np.max(np.asarray(problem.box.upper))) + 1.0)
    try:
        require_admissible(outside, problem)
        report.add("rejects_control_outside_box", False, "no rejection raised")
    except AdmissibilityError as exc:
        report.add("rejects_control_outside_box", True, str(exc))

    report.passed = all(entry["passed"] for entry in report.entries)
    return report


def require_admissible(control: ControlTrajectory, problem: ControlProblem) -> None:
    """Raise if a control tagged admissible violates the box or norm cap."""
    if not problem.box.contains(control.values):
        raise AdmissibilityError("control violates the admissible box bounds")
    norm = control.h1_linf_norm(problem.ops)
    if norm > problem.box.norm_cap:
        raise AdmissibilityError(
            f"control norm {norm:.3e} exceeds the recorded cap {problem.box.norm_cap:g}"
        )
