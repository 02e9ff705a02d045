import numpy as np
import pytest

from chcontrol.geometry import assemble_operators, build_mesh
from chcontrol.potentials import logarithmic_default
from chcontrol.problems import make_tracking_problem, random_admissible_control


@pytest.fixture(scope="session")
def mesh1d():
    return build_mesh(1, 33, 1.0)


@pytest.fixture(scope="session")
def ops1d(mesh1d):
    return assemble_operators(mesh1d)


@pytest.fixture(scope="session")
def ops2d():
    return assemble_operators(build_mesh(2, 9, 1.0))


@pytest.fixture(scope="session")
def potentials():
    return logarithmic_default()


@pytest.fixture(scope="session")
def default_problem():
    """Attainable tracking problem at default desk resolution."""
    problem, reference = make_tracking_problem()
    return problem, reference


@pytest.fixture(scope="session")
def default_base(default_problem):
    """A fixed admissible base control with its solved state."""
    problem, _ = default_problem
    rng = np.random.default_rng(123)
    base = random_admissible_control(problem, rng, amplitude=0.3)
    return base, problem.solve(base)


@pytest.fixture(scope="session")
def tiny_problem():
    """Small grid for refinement loops."""
    problem, reference = make_tracking_problem(
        resolution=17, steps=24, weights=(0.5, 1.0, 1.0, 0.8, 0.8, 1e-2)
    )
    return problem, reference
