"""Statistics of chaos solutions, error norms and convergence-order fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ChaosBasis
from .spatial import Grid2D

__all__ = [
    "ChaosSolution",
    "ConvergenceReport",
    "OrderFit",
    "REFERENCE_FLOOR",
    "chaos_error",
    "discrete_l2_error",
    "empirical_mean",
    "empirical_variance",
    "estimate_order",
    "fit_order_above_floor",
    "truncation_errors",
]

# absolute accuracy floor of the dense reference solver
REFERENCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ChaosSolution:
    """Chaos coefficients ``u_p`` at a common time ``t``.

    Only coefficients listed in ``active`` are stored (as columns of
    ``values``); every other coefficient is identically zero.
    """

    basis: ChaosBasis
    grid: Grid2D
    active: tuple[int, ...]
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.grid.size, len(self.active)):
            raise ValueError(
                f"values must have shape ({self.grid.size}, {len(self.active)}), got {self.values.shape}"
            )
        if any(not 0 <= p < self.basis.P for p in self.active):
            raise ValueError("active coefficient index outside the basis")

    def coefficient(self, p: int) -> np.ndarray:
        if not 0 <= p < self.basis.P:
            raise IndexError(f"coefficient index {p} outside 0..{self.basis.P - 1}")
        try:
            return self.values[:, self.active.index(p)]
        except ValueError:
            return np.zeros(self.grid.size)

    def has_zero_tail(self) -> bool:
        """True when no coefficient beyond ``p = m`` is non-zero."""
        m = self.basis.m
        return all(p <= m or not np.any(self.values[:, c]) for c, p in enumerate(self.active))

    def evaluate(self, xi) -> np.ndarray:
        """Realizations ``sum_p u_p Phi_p(xi)`` for samples ``xi`` of shape ``(n, m)``.

        Returns shape ``(N*N, n)``.
        """
        xi = np.atleast_2d(xi)
        limit = max(self.active) + 1 if self.active else 1
        phi = self.basis.evaluate_all(xi, limit=limit)
        return self.values @ phi[list(self.active)]


def empirical_mean(sol: ChaosSolution) -> np.ndarray:
    """The mean of the solution is its zeroth coefficient."""
    return sol.coefficient(0).copy()


def empirical_variance(sol: ChaosSolution) -> np.ndarray:
    """Pointwise variance ``sum_{p>=1} u_p^2 E[Phi_p^2]``.

    Under the zero-tail structure this is ``(1/3) sum_{p=1..m} u_p^2``.
    """
    var = np.zeros(sol.grid.size)
    if sol.has_zero_tail():
        for c, p in enumerate(sol.active):
            if 1 <= p <= sol.basis.m:
                var += sol.values[:, c] ** 2
        return var / 3.0
    moments = sol.basis.second_moments
    for c, p in enumerate(sol.active):
        if p >= 1:
            var += moments[p] * sol.values[:, c] ** 2
    return var


def discrete_l2_error(x, y, grid: Grid2D | float) -> float:
    """``s * sqrt(sum (x - y)^2)`` with ``s`` the grid spacing."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    s = grid.s if isinstance(grid, Grid2D) else float(grid)
    return s * float(np.sqrt(np.sum((x - y) ** 2)))


def chaos_error(errors_by_p: np.ndarray, moments: np.ndarray) -> np.ndarray:
    """Combine per-coefficient errors into ``sqrt(sum_p e_p^2 E[Phi_p^2])``.

    ``errors_by_p`` has the coefficient index along its last axis.
    """
    return np.sqrt(np.sum(np.asarray(errors_by_p) ** 2 * np.asarray(moments), axis=-1))


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    ratios: np.ndarray
    h: np.ndarray
    errors: np.ndarray


def estimate_order(h, errors) -> OrderFit:
    """Least-squares slope of ``log e`` against ``log h``.

    ``ratios`` holds ``log2(e_q / e_{q+1}) / log2(h_q / h_{q+1})`` for
    neighbouring pairs, i.e. the local observed orders.
    """
    h, e = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1:
        raise ValueError("h and errors must be 1D arrays of equal length")
    if len(h) < 3:
        raise ValueError(f"need at least 3 (h, error) pairs, got {len(h)}")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("step sizes and errors must be positive")
    slope, intercept = np.polyfit(np.log(h), np.log(e), 1)
    ratios = np.log2(e[:-1] / e[1:]) / np.log2(h[:-1] / h[1:])
    return OrderFit(float(slope), float(intercept), ratios, h, e)


def fit_order_above_floor(h, errors, floor: float = REFERENCE_FLOOR, factor: float = 10.0) -> OrderFit | None:
    """:func:`estimate_order` on the points whose error exceeds ``factor * floor``.

    Returns ``None`` when fewer than three points remain.
    """
    h, e = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    keep = e > factor * floor
    if keep.sum() < 3:
        return None
    return estimate_order(h[keep], e[keep])


@dataclass
class ConvergenceReport:
    """Errors of several schemes over a decreasing step-size sequence.

    ``errors[scheme]`` has shape ``(len(h), len(p_values))``; ``combined``
    holds the chaos-weighted error over those coefficients.
    """

    h: np.ndarray
    p_values: tuple[int, ...]
    moments: np.ndarray
    errors: dict = field(default_factory=dict)
    floor: float = REFERENCE_FLOOR

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if np.any(np.diff(self.h) >= 0):
            raise ValueError("step sizes must be strictly decreasing")

    def combined(self, scheme: str) -> np.ndarray:
        return chaos_error(self.errors[scheme], self.moments)

    def slope(self, scheme: str) -> OrderFit | None:
        return fit_order_above_floor(self.h, self.combined(scheme), self.floor)

    def slope_by_p(self, scheme: str) -> dict[int, OrderFit | None]:
        errs = self.errors[scheme]
        return {p: fit_order_above_floor(self.h, errs[:, c], self.floor) for c, p in enumerate(self.p_values)}


def truncation_errors(variances: np.ndarray, reference: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Discrete L2 distance of each column of ``variances`` to ``reference``."""
    diff = np.asarray(variances) - np.asarray(reference)[:, None]
    return grid.s * np.sqrt(np.sum(diff**2, axis=0))
