"""Adjoint-based optimal boundary control of a nonstandard viscous
Cahn-Hilliard system with a dynamic boundary condition.

The package provides the forward state solver, the linearized
(sensitivity) solver, the backward adjoint solver, a projected-descent
optimizer over box-constrained boundary controls, and a verification
harness probing differentiability, stability, and optimality claims
numerically on desk-scale grids.
"""

from .adjoint import AdjointTrajectory, check_compatibility_A7, solve_adjoint
from .errors import (
    AdmissibilityError,
    ConfigurationError,
    ContractViolationError,
    LinearSolveError,
    NewtonError,
    SeparationViolationError,
    SolverError,
    TerminalCompatibilityError,
    UndefinedRatioError,
)
from .geometry import (
    Mesh,
    MeshOperators,
    assemble_operators,
    build_mesh,
    inner_product_boundary,
    inner_product_bulk,
)
from .objective import AdmissibleBox, CostSpec, cost, reduced_gradient, vi_residual
from .optimizer import OptimizerOptions, OptimizeResult, clamp_box, optimize
from .parabolic import LinearStepProblem, linear_step, stability_monitor
from .potentials import PotentialSet, eval_all, eval_all_boundary, logarithmic_default
from .problems import ControlProblem, make_tracking_problem, random_admissible_control
from .sensitivity import SensitivityTrajectory, solve_linearized, taylor_remainder
from .state import (
    ControlTrajectory,
    InitialData,
    SolverOptions,
    StateTrajectory,
    free_energy,
    lipschitz_probe,
    solve_state,
)
from .verify import (
    run_gradient_check,
    run_invariant_suite,
    run_stability_probe,
    run_taylor_test,
)

__version__ = "0.1.0"
