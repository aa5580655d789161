import numpy as np
import pytest
from hypothesis import settings

from chaos_splitting import (
    Coefficient,
    Grid2D,
    ResolventCache,
    assemble_operators,
    build_basis,
    make_kernel,
    project,
    solve_covariance_eigenproblem,
)

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

MC_SEED = 20240611


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(MC_SEED))


def make_system(N=8, m=3, K=2, forcing=1.0, mean=0.0, variance=1.0):
    grid = Grid2D(N)
    ops = assemble_operators(grid, Coefficient.constant(1.0), Coefficient.constant(1.0))
    kernel = make_kernel("gaussian", 1.0, variance)
    kle = solve_covariance_eigenproblem(kernel, grid, m, lambda x, y: mean + 0.0 * x)
    return project(kle, build_basis(m, K), ops, forcing)


@pytest.fixture(scope="session")
def system8():
    return make_system()


@pytest.fixture
def ops4():
    grid = Grid2D(4)
    return assemble_operators(grid, Coefficient.affine(2.0, 0.5, -0.25), Coefficient.affine(1.5, 0.1, 0.3))


@pytest.fixture
def cache4(ops4):
    return ResolventCache(ops4)
