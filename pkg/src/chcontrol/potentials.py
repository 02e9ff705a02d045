"""Nonlinearities of the phase-separation model and their derivatives.

The model couples a singular convex potential on the bulk and on the
boundary (logarithmic by default, derivatives blow up at -1 and +1), a
smooth linear perturbation that tilts the potential, and a nonnegative
concave coupling function that multiplies the chemical potential.  All
evaluations are guarded by a separation margin ``eps_sep``: solvers keep
the order parameter inside ``[-1 + eps_sep, 1 - eps_sep]`` so every
derivative stays finite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SeparationViolationError

__all__ = [
    "ScalarPotential",
    "SmoothPerturbation",
    "CouplingFunction",
    "PotentialSet",
    "BulkPotentialValues",
    "BoundaryPotentialValues",
    "logarithmic_default",
    "eval_all",
    "eval_all_boundary",
    "check_assumptions",
]

DEFAULT_EPS_SEP = 1e-6


@dataclass(frozen=True)
class ScalarPotential:
    """A scalar potential with first and second derivative callables."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SmoothPerturbation:
    """Smooth tilt term: value, derivative, and antiderivative."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CouplingFunction:
    """Coupling between chemical potential and order parameter."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialSet:
    """Complete bundle of model nonlinearities.

    ``domination_slope`` and ``domination_offset`` record the constants of
    the bulk-by-boundary domination inequality
    ``|convex_bulk.d1(r)| <= slope * |convex_boundary.d1(r)| + offset``,
    which holds with slope = c_hat_bulk / c_hat_boundary and offset 0 for
    the logarithmic family.
    """

    convex_bulk: ScalarPotential
    convex_boundary: ScalarPotential
    smooth_bulk: SmoothPerturbation
    smooth_boundary: SmoothPerturbation
    coupling: CouplingFunction
    c_hat_bulk: float
    c_hat_boundary: float
    domination_slope: float
    domination_offset: float
    eps_sep: float = DEFAULT_EPS_SEP

    @property
    def safe_interval(self) -> tuple[float, float]:
        return (-1.0 + self.eps_sep, 1.0 - self.eps_sep)


@dataclass(frozen=True)
class BulkPotentialValues:
    """Per-node values of every nonlinearity a bulk equation needs."""

    convex_d1: np.ndarray
    convex_d2: np.ndarray
    smooth: np.ndarray
    smooth_d1: np.ndarray
    coupling: np.ndarray
    coupling_d1: np.ndarray
    coupling_d2: np.ndarray


@dataclass(frozen=True)
class BoundaryPotentialValues:
    convex_d1: np.ndarray
    convex_d2: np.ndarray
    smooth: np.ndarray
    smooth_d1: np.ndarray


def _logarithmic(c_hat: float) -> ScalarPotential:
    def value(r):
        r = np.asarray(r, dtype=float)
        return c_hat * ((1.0 + r) * np.log1p(r) + (1.0 - r) * np.log1p(-r))

    def d1(r):
        r = np.asarray(r, dtype=float)
        return c_hat * (np.log1p(r) - np.log1p(-r))

    def d2(r):
        r = np.asarray(r, dtype=float)
        return 2.0 * c_hat / (1.0 - r * r)

    return ScalarPotential(value, d1, d2)


def _linear_perturbation(slope: float) -> SmoothPerturbation:
    return SmoothPerturbation(
        value=lambda r: slope * np.asarray(r, dtype=float),
        d1=lambda r: np.full_like(np.asarray(r, dtype=float), slope),
        antiderivative=lambda r: 0.5 * slope * np.asarray(r, dtype=float) ** 2,
    )


def logarithmic_default(
    c_hat_bulk: float = 1.0,
    c_hat_boundary: float | None = None,
    pi_slope: float | None = None,
    g_choice: str | tuple = "quadratic_concave",
    pi_slope_boundary: float | None = None,
    eps_sep: float = DEFAULT_EPS_SEP,
) -> PotentialSet:
    """Build the logarithmic potential family with smooth-tilt defaults.

    The bulk and boundary convex potentials are
    ``c_hat * ((1+r) log(1+r) + (1-r) log(1-r))`` with possibly different
    positive coefficients.  The tilt defaults to slope ``-2 c_hat`` on each
    side; the total then has a single flat minimum at 0, and a steeper tilt
    (configurable) produces genuine wells.

    ``g_choice`` selects the coupling: ``"quadratic_concave"`` (default,
    ``1 - r^2/2``, nonnegative and concave on [-1, 1]), ``"identity"``
    (the linear special case, with a warning because it is negative for
    r < 0), or a ``(value, d1, d2)`` triple of callables.
    """
    if c_hat_bulk <= 0.0:
        raise ConfigurationError(f"c_hat_bulk must be positive, got {c_hat_bulk}")
    if c_hat_boundary is None:
        c_hat_boundary = c_hat_bulk
    if c_hat_boundary <= 0.0:
        raise ConfigurationError(
            f"c_hat_boundary must be positive, got {c_hat_boundary}"
        )
    if eps_sep <= 0.0 or eps_sep >= 0.5:
        raise ConfigurationError(f"eps_sep must lie in (0, 0.5), got {eps_sep}")

    slope_bulk = -2.0 * c_hat_bulk if pi_slope is None else float(pi_slope)
    if pi_slope_boundary is not None:
        slope_boundary = float(pi_slope_boundary)
    elif pi_slope is not None:
        slope_boundary = float(pi_slope)
    else:
        slope_boundary = -2.0 * c_hat_boundary

    if isinstance(g_choice, tuple):
        coupling = CouplingFunction(*g_choice)
    elif g_choice == "quadratic_concave":
        coupling = CouplingFunction(
            value=lambda r: 1.0 - 0.5 * np.asarray(r, dtype=float) ** 2,
            d1=lambda r: -np.asarray(r, dtype=float),
            d2=lambda r: np.full_like(np.asarray(r, dtype=float), -1.0),
        )
    elif g_choice in ("identity", "identity_clamped"):
        warnings.warn(
            "identity coupling is negative for r < 0 and violates the "
            "nonnegativity assumption; provided only to mirror the linear "
            "special case",
            stacklevel=2,
        )
        coupling = CouplingFunction(
            value=lambda r: np.asarray(r, dtype=float),
            d1=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            d2=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        )
    else:
        raise ConfigurationError(f"unknown coupling choice {g_choice!r}")

    return PotentialSet(
        convex_bulk=_logarithmic(c_hat_bulk),
        convex_boundary=_logarithmic(c_hat_boundary),
        smooth_bulk=_linear_perturbation(slope_bulk),
        smooth_boundary=_linear_perturbation(slope_boundary),
        coupling=coupling,
        c_hat_bulk=c_hat_bulk,
        c_hat_boundary=c_hat_boundary,
        domination_slope=c_hat_bulk / c_hat_boundary,
        domination_offset=0.0,
        eps_sep=eps_sep,
    )


def require_separated(rho: np.ndarray, eps_sep: float, where: str = "field") -> None:
    """Raise if any node leaves the open safe interval, naming the worst node."""
    rho = np.asarray(rho, dtype=float)
    bad = np.abs(rho) >= 1.0 - eps_sep
    if np.any(bad):
        idx = int(np.argmax(np.abs(rho)))
        raise SeparationViolationError(
            f"{where} violates the separation margin {eps_sep:g}: "
            f"node {idx} has value {rho[idx]!r}",
            node_index=idx,
            value=float(rho[idx]),
        )


def eval_all(ps: PotentialSet, rho: np.ndarray) -> BulkPotentialValues:
    """Evaluate all bulk nonlinearities at the given order parameter values.

    Raises
    ------
    SeparationViolationError
        If any node sits outside the open safe interval.
    """
    rho = np.asarray(rho, dtype=float)
    require_separated(rho, ps.eps_sep, "bulk order parameter")
    return BulkPotentialValues(
        convex_d1=ps.convex_bulk.d1(rho),
        convex_d2=ps.convex_bulk.d2(rho),
        smooth=ps.smooth_bulk.value(rho),
        smooth_d1=ps.smooth_bulk.d1(rho),
        coupling=ps.coupling.value(rho),
        coupling_d1=ps.coupling.d1(rho),
        coupling_d2=ps.coupling.d2(rho),
    )


def eval_all_boundary(ps: PotentialSet, rho_g: np.ndarray) -> BoundaryPotentialValues:
    """Boundary analogue of :func:`eval_all`."""
    rho_g = np.asarray(rho_g, dtype=float)
    require_separated(rho_g, ps.eps_sep, "boundary order parameter")
    return BoundaryPotentialValues(
        convex_d1=ps.convex_boundary.d1(rho_g),
        convex_d2=ps.convex_boundary.d2(rho_g),
        smooth=ps.smooth_boundary.value(rho_g),
        smooth_d1=ps.smooth_boundary.d1(rho_g),
    )


def check_assumptions(ps: PotentialSet, n_samples: int = 1000) -> list[str]:
    """Sampled checks of the structural assumptions on the nonlinearities.

    Returns a list of human-readable violations (empty when all pass):
    zero value and slope of the convex potentials at the origin, sampled
    convexity, nonnegativity and concavity of the coupling, and the
    recorded domination inequality.
    """
    violations = []
    r = np.linspace(-1.0 + 10 * ps.eps_sep, 1.0 - 10 * ps.eps_sep, n_samples)
    zero = np.zeros(1)

    for name, pot in (("bulk", ps.convex_bulk), ("boundary", ps.convex_boundary)):
        if abs(float(pot.value(zero)[0])) > 1e-12:
            violations.append(f"(A3) {name} convex potential is nonzero at 0")
        if abs(float(pot.d1(zero)[0])) > 1e-12:
            violations.append(f"(A3) {name} convex potential has nonzero slope at 0")
        if np.any(pot.d2(r) < -1e-12):
            violations.append(f"(A3) {name} convex potential is not convex")
        if np.any(pot.value(r) < -1e-12):
            violations.append(f"(A3) {name} convex potential is not nonnegative")

    if np.any(ps.coupling.value(r) < -1e-12):
        violations.append("(A2) coupling function is not nonnegative on [-1, 1]")
    if np.any(ps.coupling.d2(r) > 1e-12):
        violations.append("(A2) coupling function is not concave on [-1, 1]")

    lhs = np.abs(ps.convex_bulk.d1(r))
    rhs = ps.domination_slope * np.abs(ps.convex_boundary.d1(r)) + ps.domination_offset
    if np.any(lhs > rhs + 1e-9 * (1.0 + rhs)):
        violations.append("(A3) domination of the bulk potential derivative fails")

    return violations
