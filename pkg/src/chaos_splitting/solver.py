"""Integrate every active equation of a projected system."""

from __future__ import annotations

import numpy as np

from .analysis import ChaosSolution
from .galerkin import DeterministicSystem
from .integrators import Scheme, StepperConfig, build_corner_correction, integrate
from .spatial import ResolventCache

__all__ = ["corrections_for", "solve_system"]


def corrections_for(system: DeterministicSystem, columns, cache: ResolventCache, corner_tol: float):
    """Corner corrections for the given active columns of ``system.forcing``."""
    return [
        build_corner_correction(system.forcing[:, c], system.corner_values[c], cache, corner_tol)
        for c in columns
    ]


def solve_system(
    system: DeterministicSystem,
    config: StepperConfig,
    cache: ResolventCache | None = None,
    *,
    p_values=None,
    integrate_inactive: bool = False,
) -> ChaosSolution:
    """Coefficients ``u_p(T)`` of the chaos solution.

    Active equations are stepped together as one block of columns sharing the
    cached factorizations. Inactive equations (``g_p = 0``, zero initial data)
    have the zero solution and are only time-stepped when
    ``integrate_inactive`` is set; ``p_values`` restricts the run to a subset.
    """
    cache = cache if cache is not None else ResolventCache(system.ops)
    wanted = range(system.P) if p_values is None else p_values
    pos = {p: c for c, p in enumerate(system.active)}
    active_cols = [(p, pos[p]) for p in wanted if p in pos]
    inactive = [p for p in wanted if p not in pos] if integrate_inactive else []

    n = system.grid.size
    results = {}
    if active_cols:
        cols = [c for _, c in active_cols]
        G = system.forcing[:, cols]
        U0 = np.zeros_like(G)
        corrections = None
        if config.scheme is Scheme.MODIFIED_LIE:
            corrections = corrections_for(system, cols, cache, config.corner_tol)
        U = integrate(U0, G, config, cache, corrections=corrections)
        for k, (p, _) in enumerate(active_cols):
            results[p] = U[:, k]
    if inactive:
        Z = np.zeros((n, len(inactive)))
        corrections = None
        if config.scheme is Scheme.MODIFIED_LIE:
            corrections = [build_corner_correction(Z[:, 0], np.zeros(4), cache, config.corner_tol)] * len(inactive)
        U = integrate(Z, Z, config, cache, corrections=corrections)
        for k, p in enumerate(inactive):
            results[p] = U[:, k]

    order = tuple(sorted(results))
    values = np.column_stack([results[p] for p in order]) if order else np.zeros((n, 0))
    return ChaosSolution(system.basis, system.grid, order, values, config.T)
