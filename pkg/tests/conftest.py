import pytest

from fbreg.grid import Grid2
from fbreg.operators import LAPLACE
from fbreg.solver import ObstacleProblemSpec, boundary_field, solve

R0 = 0.5


def run(descriptor, n_cells, operator=LAPLACE, tol=1e-6):
    grid = Grid2(1.0, n_cells)
    spec = ObstacleProblemSpec(operator, grid, boundary_field(descriptor, grid, operator))
    return spec, solve(spec, tol)


@pytest.fixture(scope="session")
def radial_runs():
    """Radial problem at h = 1/32, 1/64, 1/128 keyed by n_cells."""
    return {n: run(f"radial:r0={R0}", n) for n in (64, 128, 256)}


@pytest.fixture(scope="session")
def halfspace_run():
    return run("halfspace:gamma=1,angle=0", 128)


@pytest.fixture(scope="session")
def zero_run():
    return run("zero", 32)
