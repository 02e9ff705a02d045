"""One implicit time step of the generic linear bulk/surface parabolic
problem, and the stability monitor built on top of repeated steps.

The continuous problem couples a reaction-diffusion equation in the bulk
with an evolution equation on the boundary through the outward normal
derivative, with the boundary unknown equal to the bulk trace.  The
discrete step solves the backward-Euler system for bulk and boundary
unknowns at once: boundary values are shared unknowns, so the trace
compatibility of the output is exact by construction.

This is the workhorse reused by the sensitivity and adjoint solvers.
Reaction coefficients of any sign are accepted (backward marches produce
negative ones); a conditioning warning is emitted when the time step is
larger than the reciprocal of the largest reaction magnitude.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from .errors import ContractViolationError, LinearSolveError, UndefinedRatioError
from .geometry import MeshOperators, gradient_inner_bulk, gradient_inner_boundary

__all__ = [
    "LinearStepProblem",
    "linear_step",
    "LinearRunHistory",
    "run_linear_series",
    "stability_monitor",
    "energy_norm_bulk",
    "energy_norm_boundary",
]

_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LinearStepProblem:
    """Data of one implicit step: reactions, sources, step size, previous level."""

    reaction_bulk: np.ndarray
    reaction_boundary: np.ndarray
    source_bulk: np.ndarray
    source_boundary: np.ndarray
    dt: float
    previous_bulk: np.ndarray
    previous_boundary: np.ndarray

    def validate(self, ops: MeshOperators) -> None:
        if self.dt <= 0.0:
            raise ContractViolationError(f"dt must be positive, got {self.dt}")
        n, nb = ops.n_bulk, ops.n_boundary
        for name, arr, size in (
            ("reaction_bulk", self.reaction_bulk, n),
            ("source_bulk", self.source_bulk, n),
            ("previous_bulk", self.previous_bulk, n),
            ("reaction_boundary", self.reaction_boundary, nb),
            ("source_boundary", self.source_boundary, nb),
            ("previous_boundary", self.previous_boundary, nb),
        ):
            if np.asarray(arr).shape != (size,):
                raise ContractViolationError(
                    f"{name} must have shape ({size},), got {np.asarray(arr).shape}"
                )
        if not np.allclose(
            self.previous_boundary, ops.trace_values(self.previous_bulk),
            rtol=0.0, atol=1e-12,
        ):
            raise ContractViolationError(
                "previous boundary level is not the trace of the previous bulk level"
            )


def linear_step(problem: LinearStepProblem, ops: MeshOperators) -> tuple[np.ndarray, np.ndarray]:
    """Advance the coupled linear problem by one backward-Euler step.

    Interior rows discretize the bulk equation; boundary rows are
    half-cell flux balances, so the bulk reaction and source contribute
    there with the boundary node's cell weight on top of the boundary
    equation's own terms.  Returns the new (bulk, boundary) pair; the
    boundary values are exactly the trace of the bulk values.

    Raises
    ------
    LinearSolveError
        If the direct sparse solve returns non-finite values or leaves a
        residual above tolerance.
    """
    problem.validate(ops)
    mesh = ops.mesh
    dt = problem.dt

    amax = max(
        float(np.max(np.abs(problem.reaction_bulk))),
        float(np.max(np.abs(problem.reaction_boundary))),
        0.0,
    )
    if amax > 0.0 and dt > 1.0 / amax:
        warnings.warn(
            f"time step {dt:g} exceeds 1/max|reaction| = {1.0 / amax:g}; "
            "the implicit step may be poorly conditioned",
            stacklevel=2,
        )

    diag = np.empty(ops.n_bulk)
    rhs = np.empty(ops.n_bulk)
    mask = ops.interior_mask
    bidx = mesh.boundary_index
    cw = ops.boundary_cell_weight
    a_bulk = np.asarray(problem.reaction_bulk)
    s_bulk = np.asarray(problem.source_bulk)
    diag[mask] = 1.0 / dt + a_bulk[mask]
    diag[bidx] = (
        (1.0 + cw) / dt + cw * a_bulk[bidx] + np.asarray(problem.reaction_boundary)
    )
    rhs[mask] = s_bulk[mask] + np.asarray(problem.previous_bulk)[mask] / dt
    rhs[bidx] = (
        cw * s_bulk[bidx]
        + np.asarray(problem.source_boundary)
        + (1.0 + cw) * np.asarray(problem.previous_boundary) / dt
    )

    A = (ops.coupled_spatial + sps.diags(diag)).tocsc()
    y = spsolve(A, rhs)

    if not np.all(np.isfinite(y)):
        raise LinearSolveError("sparse solve produced non-finite values")
    residual = float(np.linalg.norm(A @ y - rhs)) / (1.0 + float(np.linalg.norm(rhs)))
    if residual > _RESIDUAL_TOL:
        raise LinearSolveError(
            f"sparse solve left relative residual {residual:.3e}",
            residual_norm=residual,
        )
    return y, y[bidx]


@dataclass
class LinearRunHistory:
    """Levels and per-step sources of a repeated linear-step run."""

    dt: float
    bulk_levels: list = field(default_factory=list)
    boundary_levels: list = field(default_factory=list)
    sources_bulk: list = field(default_factory=list)
    sources_boundary: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.bulk_levels))


def run_linear_series(
    reaction_bulk: np.ndarray,
    reaction_boundary: np.ndarray,
    sources_bulk: np.ndarray,
    sources_boundary: np.ndarray,
    dt: float,
    ops: MeshOperators,
    initial_bulk: np.ndarray | None = None,
) -> LinearRunHistory:
    """March the linear problem over all given per-step sources.

    ``sources_bulk`` has shape (steps, N) and ``sources_boundary``
    (steps, N_b); reactions are frozen in time.  Starts from zero unless an
    initial bulk level is supplied.
    """
    sources_bulk = np.atleast_2d(np.asarray(sources_bulk, dtype=float))
    sources_boundary = np.atleast_2d(np.asarray(sources_boundary, dtype=float))
    if sources_bulk.shape[0] != sources_boundary.shape[0]:
        raise ContractViolationError("bulk and boundary source series differ in length")

    y = np.zeros(ops.n_bulk) if initial_bulk is None else np.asarray(initial_bulk, dtype=float).copy()
    y_g = ops.trace_values(y)
    history = LinearRunHistory(dt=dt)
    history.bulk_levels.append(y.copy())
    history.boundary_levels.append(y_g.copy())

    for k in range(sources_bulk.shape[0]):
        problem = LinearStepProblem(
            reaction_bulk=reaction_bulk,
            reaction_boundary=reaction_boundary,
            source_bulk=sources_bulk[k],
            source_boundary=sources_boundary[k],
            dt=dt,
            previous_bulk=y,
            previous_boundary=y_g,
        )
        y, y_g = linear_step(problem, ops)
        history.bulk_levels.append(y.copy())
        history.boundary_levels.append(y_g.copy())
        history.sources_bulk.append(sources_bulk[k].copy())
        history.sources_boundary.append(sources_boundary[k].copy())

    return history


def energy_norm_bulk(levels: np.ndarray, ops: MeshOperators, dt: float) -> float:
    """Discrete analogue of the parabolic energy norm of a bulk trajectory.

    Combines the L2-in-time norm of the backward difference quotients, the
    max-in-time H1 norm, and the L2-in-time norm of the discrete Laplacian
    (the H2 surrogate).
    """
    Y = np.asarray(levels, dtype=float)
    w = ops.bulk_weights
    dq = np.diff(Y, axis=0) / dt
    time_deriv_sq = dt * float(np.einsum("kn,n,kn->", dq, w, dq))
    v_sq = max(
        float(np.sum(w * Y[k] ** 2)) + gradient_inner_bulk(Y[k], Y[k], ops)
        for k in range(Y.shape[0])
    )
    lap = (ops.laplacian_bulk @ Y.T).T
    lap_sq = dt * float(np.einsum("kn,n,kn->", lap, w, lap))
    return float(np.sqrt(time_deriv_sq + v_sq + lap_sq))


def energy_norm_boundary(levels: np.ndarray, ops: MeshOperators, dt: float) -> float:
    """Boundary counterpart of :func:`energy_norm_bulk`."""
    Y = np.asarray(levels, dtype=float)
    w = ops.boundary_weights
    dq = np.diff(Y, axis=0) / dt
    time_deriv_sq = dt * float(np.einsum("kn,n,kn->", dq, w, dq))
    v_sq = max(
        float(np.sum(w * Y[k] ** 2)) + gradient_inner_boundary(Y[k], Y[k], ops)
        for k in range(Y.shape[0])
    )
    lap = (ops.laplacian_boundary @ Y.T).T
    lap_sq = dt * float(np.einsum("kn,n,kn->", lap, w, lap))
    return float(np.sqrt(time_deriv_sq + v_sq + lap_sq))


def stability_monitor(history: LinearRunHistory, ops: MeshOperators) -> float:
    """Ratio of solution energy norms to source L2 norms for a zero-start run.

    The continuous theory bounds this ratio by a constant independent of
    the data; the monitor exposes the discrete ratio so refinement studies
    can probe that boundedness.

    Raises
    ------
    UndefinedRatioError
        If the sources vanish identically (the run carries no information).
    """
    if not history.sources_bulk:
        raise UndefinedRatioError("empty run history")
    dt = history.dt
    sb = np.asarray(history.sources_bulk)
    sg = np.asarray(history.sources_boundary)
    src_bulk = np.sqrt(dt * float(np.einsum("kn,n,kn->", sb, ops.bulk_weights, sb)))
    src_boundary = np.sqrt(dt * float(np.einsum("kn,n,kn->", sg, ops.boundary_weights, sg)))
    denom = src_bulk + src_boundary
    if denom == 0.0:
        raise UndefinedRatioError("all sources vanish; stability ratio is undefined")

    numer = energy_norm_bulk(np.asarray(history.bulk_levels), ops, dt) + energy_norm_boundary(
        np.asarray(history.boundary_levels), ops, dt
    )
    return numer / denom
