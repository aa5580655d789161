"""Numerical experiments: convergence orders, corner errors, truncation, timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    REFERENCE_FLOOR,
    ChaosSolution,
    ConvergenceReport,
    discrete_l2_error,
    empirical_variance,
    truncation_errors,
)
from .basis import build_basis
from .galerkin import DeterministicSystem, project
from .integrators import Scheme, StepperConfig, build_corner_correction, integrate, reference_solution
from .kle import CovarianceKernel, KLExpansion, solve_covariance_eigenproblem
from .solver import corrections_for, solve_system
from .spatial import Coefficient, Grid2D, ResolventCache, assemble_operators

__all__ = [
    "CornerStudy",
    "TimingRow",
    "VarianceStudy",
    "corner_study",
    "order_study",
    "timing_table",
    "variance_truncation_study",
]


def _columns(system: DeterministicSystem, p_values) -> list[int]:
    pos = {p: c for c, p in enumerate(system.active)}
    missing = [p for p in p_values if p not in pos]
    if missing:
        raise ValueError(f"equations {missing} are inactive (zero solution); choose active p")
    return [pos[p] for p in p_values]


def order_study(
    system: DeterministicSystem,
    schemes,
    h_values,
    T: float = 1.0,
    p_values=range(8),
    corner_tol: float = 1e-8,
    cache: ResolventCache | None = None,
    floor: float = REFERENCE_FLOOR,
) -> ConvergenceReport:
    """Discrete L2 errors of ``u_p(T)`` against the matrix-exponential reference."""
    cache = cache if cache is not None else ResolventCache(system.ops)
    p_values = tuple(p_values)
    cols = _columns(system, p_values)
    G = system.forcing[:, cols]
    ref = reference_solution(np.zeros_like(G), G, T, system.ops)
    h_values = np.asarray(sorted(h_values, reverse=True), dtype=float)
    report = ConvergenceReport(h_values, p_values, system.basis.second_moments[list(p_values)], floor=floor)
    for scheme in schemes:
        scheme = Scheme.parse(scheme) if isinstance(scheme, str) else scheme
        errs = np.zeros((len(h_values), len(p_values)))
        for q, h in enumerate(h_values):
            if scheme is Scheme.REFERENCE:
                U = ref
            else:
                cfg = StepperConfig(scheme, float(h), T, corner_tol)
                corr = corrections_for(system, cols, cache, corner_tol) if scheme is Scheme.MODIFIED_LIE else None
                U = integrate(np.zeros_like(G), G, cfg, cache, corrections=corr)
            errs[q] = [discrete_l2_error(U[:, k], ref[:, k], system.grid) for k in range(len(cols))]
        report.errors[scheme.value] = errs
    return report


@dataclass
class CornerStudy:
    """Pointwise errors of ``u_p(T)`` for plain and modified Lie splitting."""

    grid: Grid2D
    p: int
    errors: dict = field(default_factory=dict)
    active_corners: tuple[int, ...] = ()

    def max_error(self, scheme: str) -> float:
        return float(np.max(self.errors[scheme]))

    @property
    def ratio(self) -> float:
        """Max modified-Lie error over max plain-Lie error."""
        lie = self.max_error("lie")
        return self.max_error("modified-lie") / lie if lie > 0 else 0.0

    def corner_spike(self, scheme: str) -> float:
        """Largest error at the four corner-adjacent nodes over the interior median."""
        E = self.grid.as_matrix(self.errors[scheme])
        corner = max(E[0, 0], E[0, -1], E[-1, -1], E[-1, 0])
        med = float(np.median(E[1:-1, 1:-1]))
        return float(corner / med) if med > 0 else float("inf") if corner > 0 else 0.0


def corner_study(
    system: DeterministicSystem,
    h: float,
    T: float = 1.0,
    p: int = 0,
    corner_tol: float = 1e-8,
    cache: ResolventCache | None = None,
) -> CornerStudy:
    cache = cache if cache is not None else ResolventCache(system.ops)
    (col,) = _columns(system, [p])
    g = system.forcing[:, col]
    ref = reference_solution(np.zeros_like(g), g, T, system.ops)
    corr = build_corner_correction(g, system.corner_values[col], cache, corner_tol)
    study = CornerStudy(system.grid, p, active_corners=corr.active)
    for scheme in (Scheme.LIE, Scheme.MODIFIED_LIE):
        u = integrate(np.zeros_like(g), g, StepperConfig(scheme, h, T, corner_tol), cache, corrections=corr)
        study.errors[scheme.value] = np.abs(u - ref)
    return study


@dataclass
class VarianceStudy:
    """Variance errors at ``T`` for each scheme and truncation level ``m``."""

    m_values: np.ndarray
    m_max: int
    h: float
    errors: dict = field(default_factory=dict)


def variance_truncation_study(
    kle: KLExpansion,
    ops,
    m_values,
    h: float,
    schemes,
    T: float = 1.0,
    K: int = 3,
    forcing_constant: float = 1.0,
    corner_tol: float = 1e-8,
    m_max: int | None = None,
    cache: ResolventCache | None = None,
) -> VarianceStudy:
    """Error of the truncated empirical variance against the ``m_max`` reference.

    The reference variance uses the matrix-exponential solution with all
    ``m_max`` variables. Since the projected equations decouple, ``u_p`` for
    ``p <= m`` does not depend on ``m`` and one run at ``m_max`` serves every
    truncation level. The key ``'reference'`` holds the pure truncation error.
    """
    m_values = np.asarray(sorted(m_values), dtype=int)
    m_max = int(m_values[-1]) if m_max is None else int(m_max)
    if m_values[0] < 1 or m_values[-1] > m_max or m_max > kle.m:
        raise ValueError(f"need 1 <= m <= m_max={m_max} <= {kle.m} (KL terms available)")
    cache = cache if cache is not None else ResolventCache(ops)
    basis = build_basis(m_max, K)
    system = project(kle.truncate(m_max), basis, ops, forcing_constant)
    fluct = [p for p in system.active if p >= 1]
    cols = _columns(system, fluct)
    G = system.forcing[:, cols]
    ref = reference_solution(np.zeros_like(G), G, T, ops)

    def variance(U, m):
        sub = [k for k, p in enumerate(fluct) if p <= m]
        sol = ChaosSolution(_basis_cache(m, K), system.grid, tuple(fluct[k] for k in sub), U[:, sub], T)
        return empirical_variance(sol)

    def variances(U):
        return np.column_stack([variance(U, m) for m in m_values])

    ref_var = variance(ref, m_max)
    study = VarianceStudy(m_values, m_max, h)
    study.errors["reference"] = truncation_errors(variances(ref), ref_var, system.grid)
    for scheme in schemes:
        scheme = Scheme.parse(scheme) if isinstance(scheme, str) else scheme
        if scheme is Scheme.REFERENCE:
            continue
        sol = solve_system(system, StepperConfig(scheme, h, T, corner_tol), cache, p_values=fluct)
        study.errors[scheme.value] = truncation_errors(variances(sol.values), ref_var, system.grid)
    return study


_BASES: dict = {}


def _basis_cache(m: int, K: int):
    key = (m, K)
    if key not in _BASES:
        _BASES[key] = build_basis(m, K)
    return _BASES[key]


@dataclass(frozen=True)
class TimingRow:
    N: int
    scheme: str
    median_seconds: float
    repeats: int
    samples: tuple[float, ...]


def _time_once(scheme: Scheme, ops, g, corners, h: float, T: float, corner_tol: float) -> float:
    start = time.perf_counter()
    cache = ResolventCache(ops)
    cfg = StepperConfig(scheme, h, T, corner_tol)
    corr = build_corner_correction(g, corners, cache, corner_tol) if scheme is Scheme.MODIFIED_LIE else None
    integrate(np.zeros_like(g), g, cfg, cache, corrections=corr)
    return time.perf_counter() - start


def timing_table(
    N_values,
    schemes,
    h: float,
    T: float = 1.0,
    repeats: int = 5,
    forcing_constant: float = 1.0,
    a: Coefficient | None = None,
    b: Coefficient | None = None,
    corner_tol: float = 1e-8,
    kernel: CovarianceKernel | None = None,
    kle_m: int = 10,
    kle_max_N: int = 0,
) -> tuple[list[TimingRow], list[tuple[int, float]]]:
    """Median wall-clock time for one coefficient solve per ``(N, scheme)``.

    Each repetition starts from an empty factorization cache, so the timings
    include matrix factorization. One warm-up run is discarded. The solved
    equation is the mean equation ``g_0 = forcing_constant``. KL setup time is
    measured separately for ``N <= kle_max_N``.
    """
    if repeats < 1:
        raise ValueError("need at least one timed repetition")
    a = a or Coefficient.constant(1.0)
    b = b or Coefficient.constant(1.0)
    rows, kle_rows = [], []
    for N in N_values:
        grid = Grid2D(int(N))
        ops = assemble_operators(grid, a, b)
        g = np.full(grid.size, float(forcing_constant))
        corners = np.full(4, float(forcing_constant))
        for scheme in schemes:
            scheme = Scheme.parse(scheme) if isinstance(scheme, str) else scheme
            if scheme is Scheme.REFERENCE:
                continue
            _time_once(scheme, ops, g, corners, h, T, corner_tol)
            samples = tuple(_time_once(scheme, ops, g, corners, h, T, corner_tol) for _ in range(repeats))
            rows.append(TimingRow(grid.N, scheme.value, float(np.median(samples)), repeats, samples))
        if kernel is not None and grid.N <= kle_max_N:
            start = time.perf_counter()
            solve_covariance_eigenproblem(kernel, grid, min(kle_m, grid.size))
            kle_rows.append((grid.N, time.perf_counter() - start))
    return rows, kle_rows
