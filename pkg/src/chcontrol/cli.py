"""Command-line entry point.

Subcommands mirror the library surface: ``simulate`` and ``optimize`` run
the solvers and persist fields, history, summary, and a checkpoint;
``grad-check``, ``taylor-test``, ``stability-probe``, and ``invariants``
run the verification probes and write machine-readable verdicts.

Exit codes: 0 success, 2 configuration rejected, 3 solver failure,
4 verification failure.  The output root can be overridden with the
``CHCONTROL_OUTPUT_ROOT`` environment variable or ``--output``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigurationError, ContractViolationError, SolverError
from .io import (
    export_adjoint_fields,
    export_fields,
    save_checkpoint,
    state_summary,
    write_history_csv,
    write_summary,
)
from .optimizer import optimize
from .verify import (
    run_gradient_check,
    run_invariant_suite,
    run_stability_probe,
    run_taylor_test,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def _run_dir(config: RunConfig, override: str | None) -> Path:
    directory = Path(override) if override else Path(config.output_directory)
    root = os.environ.get("CHCONTROL_OUTPUT_ROOT")
    if root and not directory.is_absolute():
        directory = Path(root) / directory
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _cmd_simulate(config: RunConfig, out: Path) -> int:
    problem = config.build_problem()
    control = config.build_control()
    state = problem.solve(control)
    export_fields(out, state, control, problem.mesh, config.field_stride)
    rows = [
        {
            "step": k,
            "time": float(state.times[k]),
            "min_mu": float(state.mu[k].min()),
            "max_abs_rho": float(abs(state.rho[k]).max()),
            "newton_iterations": int(state.newton_iterations[k - 1]) if k else 0,
        }
        for k in range(state.times.shape[0])
    ]
    write_history_csv(out / "history.csv", rows)
    save_checkpoint(out / "checkpoint.bin", state, control, problem.mesh)
    summary = state_summary(state, control, problem.ps, problem.ops)
    summary["seed"] = config.seed
    write_summary(out / "summary.json", summary)
    print(json.dumps({"min_mu": summary["min_mu"],
                      "separation_margin": summary["separation_margin"]}))
    return EXIT_OK


def _cmd_optimize(config: RunConfig, out: Path) -> int:
    problem = config.build_problem()
    u0 = config.build_control()
    result = optimize(u0, problem, config.optimizer_options())
    write_history_csv(out / "history.csv", result.history)
    export_fields(out, result.state, result.control, problem.mesh, config.field_stride)
    if result.adjoint is not None:
        export_adjoint_fields(out, result.adjoint, problem.mesh, config.field_stride)
    save_checkpoint(out / "checkpoint.bin", result.state, result.control, problem.mesh)
    summary = {
        "status": result.status,
        "iterations": result.iterations,
        "cost": result.cost,
        "cost_breakdown": result.breakdown,
        "vi_residual": result.vi_residual,
        "seed": config.seed,
    }
    write_summary(out / "summary.json", summary)
    print(json.dumps({"status": result.status, "cost": result.cost}))
    return EXIT_OK


def _cmd_verify(config: RunConfig, out: Path, which: str) -> int:
    problem = config.build_problem()
    v = config.verify_options()
    seed = config.seed
    if which == "grad-check":
        report = run_gradient_check(
            problem,
            directions=v.get("directions", 3),
            epsilons=v.get("epsilons", (2e-2, 1e-2, 5e-3)),
            seed=seed,
        )
    elif which == "taylor-test":
        report = run_taylor_test(
            problem,
            directions=v.get("directions", 3),
            scales=v.get("taylor_scales", (0.2, 0.1, 0.05, 0.025)),
            seed=seed,
        )
    elif which == "stability-probe":
        report = run_stability_probe(
            problem, pairs=v.get("stability_pairs", 20), seed=seed
        )
    else:
        report = run_invariant_suite(problem, seed=seed)
    verdict = report.as_dict()
    write_summary(out / "summary.json", verdict)
    print(json.dumps(verdict))
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chcontrol",
        description="Boundary-control solvers and verification probes for a "
        "viscous phase-separation system with a dynamic boundary condition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run the forward solver and export the trajectory"),
        ("optimize", "run projected gradient descent over the admissible box"),
        ("grad-check", "compare adjoint, linearized, and finite-difference derivatives"),
        ("taylor-test", "check the quadratic remainder of the state map"),
        ("stability-probe", "probe the control-to-state Lipschitz ratio"),
        ("invariants", "check separation, traces, positivity, and rejections"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--output", default=None, help="output directory override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = _run_dir(config, args.output)
        if args.command == "simulate":
            return _cmd_simulate(config, out)
        if args.command == "optimize":
            return _cmd_optimize(config, out)
        return _cmd_verify(config, out, args.command)
    except (ConfigurationError, ContractViolationError) as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
