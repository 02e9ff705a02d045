"""Run persistence: field snapshots, histories, summaries, checkpoints.

CSV files serialize floats with 17 significant digits so a written value
parses back to the identical double.  The checkpoint is a raw binary dump
with an explicit little-endian layout (see ``docs/formats.md``): an 8-byte
magic, five little-endian uint32 header fields, the domain length as a
little-endian float64, then the time grid and the field arrays as
float64 in C order, one field after another.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import Mesh
from .state import ControlTrajectory, StateTrajectory, free_energy

__all__ = [
    "CHECKPOINT_MAGIC",
    "export_fields",
    "export_adjoint_fields",
    "write_history_csv",
    "write_summary",
    "save_checkpoint",
    "load_checkpoint",
    "state_summary",
]

CHECKPOINT_MAGIC = b"CHBCKPT1"
_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FMT % value


def export_fields(
    run_dir,
    state: StateTrajectory,
    control: ControlTrajectory,
    mesh: Mesh,
    stride: int = 1,
) -> list[str]:
    """Write per-level bulk and boundary CSV snapshots under ``fields/``.

    Bulk columns: node coordinates (one per dimension), chemical potential,
    order parameter.  Boundary columns: arc coordinate, boundary order
    parameter, control.  Returns the written paths.
    """
    fields_dir = Path(run_dir) / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    arc = mesh.arc_coordinates
    written = []
    coord_names = ["x", "y"][: mesh.dimension]
    levels = list(range(0, state.times.shape[0], max(1, stride)))
    if levels[-1] != state.times.shape[0] - 1:
        levels.append(state.times.shape[0] - 1)
    for k in levels:
        bulk_path = fields_dir / f"bulk_t{k:04d}.csv"
        with open(bulk_path, "w") as f:
            f.write(",".join(coord_names + ["mu", "rho"]) + "\n")
            for i in range(mesh.n_bulk):
                coords = [_fmt(c) for c in mesh.bulk_nodes[i]]
                f.write(",".join(coords + [_fmt(state.mu[k, i]), _fmt(state.rho[k, i])]) + "\n")
        boundary_path = fields_dir / f"boundary_t{k:04d}.csv"
        with open(boundary_path, "w") as f:
            f.write("arc,rho_boundary,control\n")
            for i in range(mesh.n_boundary):
                f.write(
                    ",".join(
                        [_fmt(arc[i]), _fmt(state.rho_g[k, i]), _fmt(control.values[k, i])]
                    )
                    + "\n"
                )
        written += [str(bulk_path), str(boundary_path)]
    return written


def export_adjoint_fields(run_dir, adjoint, mesh: Mesh, stride: int = 1) -> list[str]:
    """Write per-level adjoint snapshots: bulk columns (coordinates, p, q)
    and boundary columns (arc coordinate, boundary adjoint)."""
    fields_dir = Path(run_dir) / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    arc = mesh.arc_coordinates
    coord_names = ["x", "y"][: mesh.dimension]
    n_levels = adjoint.times.shape[0]
    levels = list(range(0, n_levels, max(1, stride)))
    if levels[-1] != n_levels - 1:
        levels.append(n_levels - 1)
    written = []
    for k in levels:
        bulk_path = fields_dir / f"adjoint_bulk_t{k:04d}.csv"
        with open(bulk_path, "w") as f:
            f.write(",".join(coord_names + ["p", "q"]) + "\n")
            for i in range(mesh.n_bulk):
                coords = [_fmt(c) for c in mesh.bulk_nodes[i]]
                f.write(",".join(coords + [_fmt(adjoint.p[k, i]), _fmt(adjoint.q[k, i])]) + "\n")
        boundary_path = fields_dir / f"adjoint_boundary_t{k:04d}.csv"
        with open(boundary_path, "w") as f:
            f.write("arc,q_boundary\n")
            for i in range(mesh.n_boundary):
                f.write(",".join([_fmt(arc[i]), _fmt(adjoint.q_g[k, i])]) + "\n")
        written += [str(bulk_path), str(boundary_path)]
    return written


def write_history_csv(path, rows: list[dict]) -> None:
    """Write a list of uniform dict rows as CSV with full-precision floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0].keys())
    lines = [",".join(keys)]
    for row in rows:
        cells = []
        for key in keys:
            value = row[key]
            if isinstance(value, bool):
                cells.append(str(int(value)))
            elif isinstance(value, float):
                cells.append(_fmt(value))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_summary(path, summary: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def state_summary(state: StateTrajectory, control: ControlTrajectory, ps, ops) -> dict:
    """Diagnostics of one forward run: energy series, positivity and
    separation margins, nonlinear iteration counts."""
    energies = [
        free_energy(state.mu[k], state.rho[k], state.rho_g[k], control.values[k], ps, ops)
        for k in range(state.times.shape[0])
    ]
    return {
        "final_time": float(state.times[-1]),
        "steps": int(state.n_steps),
        "min_mu": state.min_mu(),
        "separation_margin": state.separation_margin(),
        "energy_initial": energies[0],
        "energy_final": energies[-1],
        "energy_series": energies,
        "newton_iterations_max": int(np.max(state.newton_iterations)),
        "newton_iterations_total": int(np.sum(state.newton_iterations)),
        "positivity_warnings": state.positivity_warnings,
    }


def save_checkpoint(path, state: StateTrajectory, control: ControlTrajectory, mesh: Mesh) -> None:
    """Dump the full trajectory and control in the documented binary layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_levels = state.times.shape[0]
    header = np.array(
        [mesh.dimension, mesh.resolution, mesh.n_bulk, mesh.n_boundary, n_levels],
        dtype="<u4",
    )
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(header.tobytes())
        f.write(np.array([mesh.domain_length], dtype="<f8").tobytes())
        for arr in (state.times, state.mu, state.rho, state.rho_g, control.values):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> dict:
    """Read a checkpoint back; arrays are bit-identical to what was saved."""
    blob = Path(path).read_bytes()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ConfigurationError(f"{path} is not a checkpoint (bad magic)")
    header = np.frombuffer(blob, dtype="<u4", count=5, offset=8)
    dimension, resolution, n_bulk, n_boundary, n_levels = (int(v) for v in header)
    offset = 8 + 5 * 4
    domain_length = float(np.frombuffer(blob, dtype="<f8", count=1, offset=offset)[0])
    offset += 8

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        return arr.copy()

    return {
        "dimension": dimension,
        "resolution": resolution,
        "n_bulk": n_bulk,
        "n_boundary": n_boundary,
        "domain_length": domain_length,
        "times": take((n_levels,)),
        "mu": take((n_levels, n_bulk)),
        "rho": take((n_levels, n_bulk)),
        "rho_boundary": take((n_levels, n_boundary)),
        "control": take((n_levels, n_boundary)),
    }
