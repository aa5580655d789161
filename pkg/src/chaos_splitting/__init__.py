"""Stochastic Galerkin solver for the heat equation with additive random forcing.

The random forcing is expanded in Karhunen-Loeve modes, the solution in
Legendre chaos of uniform variables. The resulting decoupled deterministic
heat equations are integrated with resolvent splitting schemes.
"""

from .analysis import ChaosSolution, ConvergenceReport, empirical_mean, empirical_variance, estimate_order
from .basis import ChaosBasis, basis_size, build_basis, fourier_legendre_eval, legendre_eval
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .galerkin import DeterministicSystem, project
from .integrators import Scheme, StepperConfig, integrate, reference_solution
from .kle import KLExpansion, make_kernel, sample_field, solve_covariance_eigenproblem
from .solver import solve_system
from .spatial import Coefficient, Grid2D, ResolventCache, assemble_operators

__version__ = "0.1.0"

__all__ = [
    "ChaosBasis",
    "ChaosSolution",
    "Coefficient",
    "ConfigError",
    "ConvergenceReport",
    "DeterministicSystem",
    "ExperimentConfig",
    "Grid2D",
    "KLExpansion",
    "ResolventCache",
    "Scheme",
    "StepperConfig",
    "assemble_operators",
    "basis_size",
    "build_basis",
    "empirical_mean",
    "empirical_variance",
    "estimate_order",
    "fourier_legendre_eval",
    "integrate",
    "legendre_eval",
    "load_config",
    "make_kernel",
    "parse_config",
    "project",
    "reference_solution",
    "sample_field",
    "solve_covariance_eigenproblem",
    "solve_system",
]
