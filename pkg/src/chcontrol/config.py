"""Run configuration: a JSON file validated against the standing
assumptions, then built into a ready-to-run problem bundle.

All model quantities are dimensionless (the state system is posed on a
unit-scale domain with order-one coefficients), so keys carry descriptive
names rather than unit suffixes; see ``docs/formats.md`` for the full key
hierarchy.  Validation happens at load time and rejected configurations
name the violated assumption by its label, (A1) through (A7).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import assemble_operators, build_mesh
from .objective import AdmissibleBox, CostSpec
from .optimizer import OptimizerOptions
from .potentials import check_assumptions, logarithmic_default
from .problems import (
    ControlProblem,
    smooth_initial_data,
    smooth_reference_control,
    zero_targets,
)
from .state import ControlTrajectory, InitialData, SolverOptions, solve_state

__all__ = ["RunConfig", "load_config", "default_config_dict"]


def default_config_dict() -> dict:
    """The bundled default configuration; loads with all checks passing."""
    return {
        "mesh": {"dimension": 1, "resolution": 33, "domain_length": 1.0},
        "time": {"final_time": 0.25, "steps": 64},
        "potentials": {
            "c_hat_bulk": 1.0,
            "c_hat_boundary": 1.0,
            "pi_slope": None,
            "coupling": "quadratic_concave",
            "eps_sep": 1e-6,
        },
        "initial": {
            "kind": "smooth-bump",
            "mu_level": 0.5,
            "rho_level": -0.1,
            "rho_amplitude": 0.25,
            "path": None,
        },
        "control": {"kind": "zero", "value": 0.0, "path": None},
        "cost": {
            "weights": {
                "mu": 0.5,
                "rho": 1.0,
                "rho_boundary": 1.0,
                "terminal": 0.8,
                "terminal_boundary": 0.8,
                "control": 0.01,
            },
            "targets": {"kind": "reference-control", "amplitude": 0.4},
        },
        "box": {"lower": -1.0, "upper": 1.0, "norm_cap": 50.0},
        "solver": {"newton_tol": 1e-10, "newton_max_iter": 50},
        "optimizer": {
            "max_iters": 30,
            "armijo_c": 1e-4,
            "shrink": 0.5,
            "step0": 50.0,
            "tol_grad": 1e-12,
            "tol_vi": 1e-9,
        },
        "verify": {
            "directions": 3,
            "epsilons": [2e-2, 1e-2, 5e-3],
            "taylor_scales": [0.2, 0.1, 0.05, 0.025],
            "stability_pairs": 20,
        },
        "seed": 0,
        "output": {"directory": "runs/default", "field_stride": 1},
    }


@dataclass
class RunConfig:
    """Validated configuration plus lazily built problem pieces."""

    raw: dict
    path: str = "<dict>"
    _problem: ControlProblem | None = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def output_directory(self) -> str:
        return self.raw["output"]["directory"]

    @property
    def field_stride(self) -> int:
        return int(self.raw["output"].get("field_stride", 1))

    def optimizer_options(self) -> OptimizerOptions:
        o = self.raw.get("optimizer", {})
        defaults = OptimizerOptions()
        return OptimizerOptions(
            max_iters=int(o.get("max_iters", defaults.max_iters)),
            armijo_c=float(o.get("armijo_c", defaults.armijo_c)),
            shrink=float(o.get("shrink", defaults.shrink)),
            step0=float(o.get("step0", defaults.step0)),
            tol_grad=float(o.get("tol_grad", defaults.tol_grad)),
            tol_vi=float(o.get("tol_vi", defaults.tol_vi)),
        )

    def verify_options(self) -> dict:
        return dict(self.raw.get("verify", {}))

    def build_problem(self) -> ControlProblem:
        """Assemble mesh, potentials, initial data, cost, and box.

        Target generation of kind ``reference-control`` runs one forward
        solve at a smooth admissible control, which guarantees attainable
        tracking problems.  The result is cached.
        """
        if self._problem is not None:
            return self._problem
        raw = self.raw
        mesh = build_mesh(
            raw["mesh"]["dimension"],
            raw["mesh"]["resolution"],
            raw["mesh"].get("domain_length", 1.0),
        )
        ops = assemble_operators(mesh)
        pot = raw["potentials"]
        ps = logarithmic_default(
            c_hat_bulk=pot.get("c_hat_bulk", 1.0),
            c_hat_boundary=pot.get("c_hat_boundary"),
            pi_slope=pot.get("pi_slope"),
            g_choice=pot.get("coupling", "quadratic_concave"),
            eps_sep=pot.get("eps_sep", 1e-6),
        )
        init = self._build_initial(mesh, ops, ps)
        times = np.linspace(
            0.0, raw["time"]["final_time"], raw["time"]["steps"] + 1
        )
        solver = raw.get("solver", {})
        opts = SolverOptions(
            newton_tol=float(solver.get("newton_tol", 1e-10)),
            newton_max_iter=int(solver.get("newton_max_iter", 50)),
        )
        box = AdmissibleBox(
            lower=raw["box"]["lower"],
            upper=raw["box"]["upper"],
            norm_cap=raw["box"].get("norm_cap", np.inf),
        )

        w = raw["cost"]["weights"]
        targets_spec = raw["cost"].get("targets", {"kind": "zero"})
        if targets_spec.get("kind", "zero") == "reference-control":
            reference = smooth_reference_control(
                times, mesh, amplitude=targets_spec.get("amplitude", 0.4)
            )
            ref_state = solve_state(init, reference, ps, ops, opts)
            targets = {
                "target_mu": ref_state.mu,
                "target_rho": ref_state.rho,
                "target_rho_boundary": ref_state.rho_g,
                "target_terminal": ref_state.rho[-1],
                "target_terminal_boundary": ref_state.rho_g[-1],
            }
        else:
            targets = zero_targets(ops, times.shape[0])

        spec = CostSpec(
            weight_mu=w.get("mu", 0.0),
            weight_rho=w.get("rho", 0.0),
            weight_rho_boundary=w.get("rho_boundary", 0.0),
            weight_terminal=w.get("terminal", 0.0),
            weight_terminal_boundary=w.get("terminal_boundary", 0.0),
            weight_control=w.get("control", 0.0),
            **targets,
        )
        self._problem = ControlProblem(
            ops=ops, ps=ps, init=init, times=times, cost_spec=spec, box=box,
            solver_opts=opts,
        )
        return self._problem

    def _build_initial(self, mesh, ops, ps) -> InitialData:
        spec = self.raw["initial"]
        kind = spec.get("kind", "smooth-bump")
        if kind == "constant":
            init = InitialData(
                mu0=np.full(mesh.n_bulk, float(spec.get("mu_level", 0.0))),
                rho0=np.full(mesh.n_bulk, float(spec.get("rho_level", 0.0))),
            )
        elif kind == "smooth-bump":
            init = smooth_initial_data(
                mesh,
                mu_level=float(spec.get("mu_level", 0.5)),
                rho_level=float(spec.get("rho_level", -0.1)),
                rho_amplitude=float(spec.get("rho_amplitude", 0.25)),
            )
        elif kind == "from-file":
            data = np.load(spec["path"])
            init = InitialData(mu0=data["mu0"], rho0=data["rho0"])
        else:
            raise ConfigurationError(f"unknown initial-data kind {kind!r}")
        init.validate(ops, ps.eps_sep)
        return init

    def build_control(self) -> ControlTrajectory:
        problem = self.build_problem()
        spec = self.raw.get("control", {"kind": "zero"})
        kind = spec.get("kind", "zero")
        if kind == "zero":
            return problem.zero_control()
        if kind == "constant":
            return problem.constant_control(float(spec.get("value", 0.0)))
        if kind == "from-file":
            data = np.load(spec["path"])
            return ControlTrajectory(times=problem.times, values=data["values"])
        raise ConfigurationError(f"unknown control kind {kind!r}")


def _validate(raw: dict) -> list[str]:
    """Collect assumption violations; empty means the config is accepted."""
    violations: list[str] = []

    mesh = raw.get("mesh", {})
    if mesh.get("resolution", 0) < 3:
        violations.append("mesh.resolution must be at least 3 nodes per axis")
    if mesh.get("dimension") not in (1, 2):
        violations.append("mesh.dimension must be 1 or 2")
    if mesh.get("domain_length", 1.0) <= 0:
        violations.append("mesh.domain_length must be positive")

    time_spec = raw.get("time", {})
    if time_spec.get("final_time", 0.0) <= 0.0:
        violations.append("time.final_time must be positive")
    if time_spec.get("steps", 0) < 1:
        violations.append("time.steps must be at least 1")

    pot = raw.get("potentials", {})
    try:
        ps = logarithmic_default(
            c_hat_bulk=pot.get("c_hat_bulk", 1.0),
            c_hat_boundary=pot.get("c_hat_boundary"),
            pi_slope=pot.get("pi_slope"),
            g_choice=pot.get("coupling", "quadratic_concave"),
            eps_sep=pot.get("eps_sep", 1e-6),
        )
        violations.extend(check_assumptions(ps))
    except ConfigurationError as exc:
        violations.append(f"(A2)/(A3) potentials rejected: {exc}")
        ps = None

    init = raw.get("initial", {})
    kind = init.get("kind", "smooth-bump")
    if kind == "constant":
        if init.get("mu_level", 0.0) < 0.0:
            violations.append("(A1) initial chemical potential must be nonnegative")
        if ps is not None and abs(init.get("rho_level", 0.0)) >= 1.0 - ps.eps_sep:
            violations.append(
                "(A1) initial order parameter must keep the separation margin"
            )
    elif kind == "smooth-bump":
        mu_level = init.get("mu_level", 0.5)
        if mu_level < 0.0:
            violations.append("(A1) initial chemical potential must be nonnegative")
        reach = abs(init.get("rho_level", -0.1)) + abs(init.get("rho_amplitude", 0.25))
        if ps is not None and reach >= 1.0 - ps.eps_sep:
            violations.append(
                "(A1) initial order parameter must keep the separation margin"
            )
    elif kind != "from-file":
        violations.append(f"initial.kind {kind!r} is not recognized")

    box = raw.get("box", {})
    lower, upper = box.get("lower", -1.0), box.get("upper", 1.0)
    if np.any(np.asarray(lower) > np.asarray(upper)):
        violations.append("(A4) admissible box is empty: lower bound exceeds upper")
    if box.get("norm_cap", 1.0) <= 0.0:
        violations.append("(A4)/(A5) control norm cap must be positive")

    weights = raw.get("cost", {}).get("weights", {})
    if any(v < 0.0 for v in weights.values()):
        violations.append("(A6) cost weights must be nonnegative")

    w4 = weights.get("terminal", 0.0)
    w5 = weights.get("terminal_boundary", 0.0)
    if (w4 != w5) and not (w4 == 0.0 and w5 == 0.0):
        violations.append(
            "(A7) terminal weights must be equal (or both zero) so the two "
            "terminal adjoint conditions agree on the boundary"
        )

    return violations


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises
    ------
    ConfigurationError
        On a parse failure or with the list of violated assumptions.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc

    violations = _validate(raw)
    if violations:
        raise ConfigurationError(
            "configuration rejected:\n  - " + "\n  - ".join(violations)
        )
    return RunConfig(raw=raw, path=str(path))
