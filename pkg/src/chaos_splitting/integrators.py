"""Time integrators for ``u' = (A + B) u + g(t)``.

All steppers act on a single grid function or on a block of grid functions
stored as columns; the same cached factorizations serve every column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .spatial import ResolventCache, SplitOperators, stationary_solve

__all__ = [
    "CornerCorrection",
    "DenseSizeError",
    "Scheme",
    "StepperConfig",
    "build_corner_correction",
    "crank_nicolson_step",
    "integrate",
    "lie_step",
    "modified_lie_run",
    "partition_of_unity",
    "reference_solution",
    "trapezoidal_step",
]

DEFAULT_TOL = 1e-8
MAX_DENSE_SIZE = 64 * 64


class DenseSizeError(ValueError):
    """The dense reference solver was asked for a system that is too large."""


class Scheme(str, enum.Enum):
    LIE = "lie"
    MODIFIED_LIE = "modified-lie"
    TRAPEZOIDAL = "trapezoidal"
    CRANK_NICOLSON = "crank-nicolson"
    REFERENCE = "reference"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        key = name.strip().lower().replace("_", "-")
        aliases = {"cn": "crank-nicolson", "mlspl": "modified-lie", "tspl": "trapezoidal", "expm": "reference"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {name!r}; known schemes: {known}") from None


@dataclass(frozen=True)
class StepperConfig:
    scheme: Scheme
    h: float
    T: float
    corner_tol: float = DEFAULT_TOL
    swap_order: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme) if isinstance(self.scheme, str) else self.scheme)
        if not self.h > 0 or not self.T > 0:
            raise ValueError(f"need h > 0 and T > 0, got h={self.h}, T={self.T}")
        if not self.corner_tol > 0:
            raise ValueError(f"corner tolerance must be positive, got {self.corner_tol}")
        ratio = self.T / self.h
        if abs(ratio - round(ratio)) > 0.5 * math.ulp(ratio):
            raise ValueError(f"T={self.T!r} is not a whole number of steps of h={self.h!r}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))


# -- single steps -------------------------------------------------------------


def lie_step(u, g_n, h: float, cache: ResolventCache, swap_order: bool = False) -> np.ndarray:
    """``(I - hA)^{-1} (I - hB)^{-1} (u + h g_n)``.

    With ``swap_order`` the resolvents are applied in the opposite order.
    """
    first, second = ("A", "B") if swap_order else ("B", "A")
    return cache.solve(second, h, cache.solve(first, h, u + h * g_n))


def trapezoidal_step(u, g_n, g_np1, h: float, cache: ResolventCache, swap_order: bool = False) -> np.ndarray:
    """``(I - h/2 B)^{-1} (I - h/2 A)^{-1} [(I + h/2 A)(I + h/2 B) u + h/2 (g_n + g_{n+1})]``."""
    ops = cache.ops
    half = 0.5 * h
    inner, outer = (ops.A, ops.B) if swap_order else (ops.B, ops.A)
    w = u + half * (inner @ u)
    rhs = w + half * (outer @ w) + half * (g_n + g_np1)
    first, second = ("B", "A") if swap_order else ("A", "B")
    return cache.solve(second, half, cache.solve(first, half, rhs))


def crank_nicolson_step(u, g_n, g_np1, h: float, cache: ResolventCache) -> np.ndarray:
    """``(I - h/2 L)^{-1} [(I + h/2 L) u + h/2 (g_n + g_{n+1})]``."""
    half = 0.5 * h
    rhs = u + half * (cache.ops.L @ u) + half * (g_n + g_np1)
    return cache.solve("L", half, rhs)


# -- corner correction ---------------------------------------------------------


def partition_of_unity(grid) -> np.ndarray:
    """Bilinear corner polynomials ``P_1..P_4`` sampled on the grid, shape ``(4, N*N)``."""
    X, Y = grid.mesh
    polys = [
        0.25 * (X - 1) * (Y - 1),
        -0.25 * (X + 1) * (Y - 1),
        0.25 * (X + 1) * (Y + 1),
        -0.25 * (X - 1) * (Y + 1),
    ]
    return np.array([p.ravel() for p in polys])


def _constant(values):
    values = np.asarray(values, dtype=float)
    return lambda t: values


@dataclass(frozen=True)
class CornerCorrection:
    """Lifting data that makes the inhomogeneity vanish at its non-zero corners.

    ``active`` lists 0-based corner numbers with ``|g_{p,i}(0)| >= TOL``.
    ``f`` and ``v`` have one column per active corner, ``L v_i = f_i``.
    ``corner_values(t)`` and ``corner_derivatives(t)`` return all four corner
    values (and time derivatives) of the inhomogeneity.
    """

    active: tuple[int, ...]
    partition: np.ndarray
    f: np.ndarray
    v: np.ndarray
    corner_values: Callable = field(repr=False)
    corner_derivatives: Callable = field(repr=False)
    static: bool = True

    @property
    def empty(self) -> bool:
        return not self.active

    def lift(self, t: float) -> np.ndarray:
        """``sum_{i in I_p} g_{p,i}(t) v_i``."""
        if self.empty:
            return np.zeros(self.v.shape[0])
        return self.v @ np.asarray(self.corner_values(t))[list(self.active)]

    def lifted_forcing(self, g_t: np.ndarray, t: float) -> np.ndarray:
        """``g(t) + sum_{i in I_p} (g'_{p,i}(t) v_i - g_{p,i}(t) f_i)``."""
        if self.empty:
            return g_t
        idx = list(self.active)
        dvals = np.asarray(self.corner_derivatives(t))[idx]
        vals = np.asarray(self.corner_values(t))[idx]
        return g_t + self.v @ dvals - self.f @ vals


def build_corner_correction(
    g0: np.ndarray,
    corner_values,
    cache: ResolventCache,
    corner_tol: float = DEFAULT_TOL,
    corner_derivatives=None,
) -> CornerCorrection:
    """Set up the corner lifting for one inhomogeneity.

    Parameters
    ----------
    g0 : ndarray
        The inhomogeneity at ``t = 0`` on the grid.
    corner_values : array of 4 floats or callable ``t -> array``
        ``g_{p,i}(t)`` at the corners ``(-1,-1), (1,-1), (1,1), (-1,1)``.
    corner_derivatives : array or callable, optional
        Time derivatives of the corner values; zero by default.
    """
    if not corner_tol > 0:
        raise ValueError(f"corner tolerance must be positive, got {corner_tol}")
    values = corner_values if callable(corner_values) else _constant(corner_values)
    derivs = corner_derivatives if callable(corner_derivatives) else _constant(
        np.zeros(4) if corner_derivatives is None else corner_derivatives
    )
    static = not callable(corner_values) and not callable(corner_derivatives) and not np.any(derivs(0.0))
    c0 = np.asarray(values(0.0), dtype=float)
    if c0.shape != (4,):
        raise ValueError(f"need four corner values, got shape {c0.shape}")
    grid = cache.ops.grid
    partition = partition_of_unity(grid)
    active = tuple(i for i in range(4) if abs(c0[i]) >= corner_tol)
    n = grid.size
    if not active:
        return CornerCorrection((), partition, np.zeros((n, 0)), np.zeros((n, 0)), values, derivs, static)
    f = np.column_stack([partition[i] * g0 / c0[i] for i in active])
    v = stationary_solve(cache.ops, f, cache)
    return CornerCorrection(active, partition, f, v, values, derivs, static)


# -- time loops ----------------------------------------------------------------


def _forcing(g) -> Callable:
    if callable(g):
        return g
    g = np.asarray(g, dtype=float)
    return lambda t: g


def _run(step, u0, g, config: StepperConfig, record: bool):
    gfun = _forcing(g)
    h, n = config.h, config.steps
    u = np.array(u0, dtype=float)
    traj = [u.copy()] if record else None
    g_n = gfun(0.0)
    for k in range(n):
        g_np1 = gfun((k + 1) * h)
        u = step(u, g_n, g_np1)
        g_n = g_np1
        if record:
            traj.append(u.copy())
    return traj if record else u


def integrate(u0, g, config: StepperConfig, cache: ResolventCache, *, record: bool = False, corrections=None):
    """Integrate from ``t = 0`` to ``config.T`` with ``config.scheme``.

    ``u0`` and ``g`` are grid functions or blocks of column grid functions;
    ``g`` may also be a callable ``t -> array``. For the modified Lie scheme,
    ``corrections`` is one :class:`CornerCorrection` (or a list, one per
    column). Returns the final state, or the list of states at every
    ``t_n = n h`` when ``record`` is set.
    """
    scheme, h = config.scheme, config.h
    if scheme is Scheme.LIE:
        step = lambda u, gn, gn1: lie_step(u, gn, h, cache, config.swap_order)  # noqa: E731
    elif scheme is Scheme.TRAPEZOIDAL:
        step = lambda u, gn, gn1: trapezoidal_step(u, gn, gn1, h, cache, config.swap_order)  # noqa: E731
    elif scheme is Scheme.CRANK_NICOLSON:
        step = lambda u, gn, gn1: crank_nicolson_step(u, gn, gn1, h, cache)  # noqa: E731
    elif scheme is Scheme.MODIFIED_LIE:
        if corrections is None:
            raise ValueError("modified Lie splitting needs corner corrections")
        return modified_lie_run(u0, g, corrections, config, cache, record=record)
    elif scheme is Scheme.REFERENCE:
        if callable(g):
            raise ValueError("the reference solver needs a time-independent inhomogeneity")
        if record:
            return [reference_solution(u0, g, k * h, cache.ops) for k in range(config.steps + 1)]
        return reference_solution(u0, g, config.T, cache.ops)
    else:  # pragma: no cover
        raise ValueError(f"unsupported scheme {scheme}")
    return _run(step, u0, g, config, record)


def modified_lie_run(u0, g, corrections, config: StepperConfig, cache: ResolventCache, *, record: bool = False):
    """Lie splitting on the corner-lifted problem, unlifted at each step.

    The lifted problem has initial value ``u0 + sum g_{p,i}(0) v_i`` and
    inhomogeneity :meth:`CornerCorrection.lifted_forcing`; reported states
    are ``u~^n - sum g_{p,i}(t_n) v_i``. Without active corners this is
    plain Lie splitting.
    """
    u0 = np.asarray(u0, dtype=float)
    block = u0.ndim == 2
    corr_list: Sequence[CornerCorrection] = corrections if isinstance(corrections, (list, tuple)) else [corrections]
    if block and len(corr_list) != u0.shape[1]:
        raise ValueError(f"need one correction per column: {len(corr_list)} for {u0.shape[1]} columns")
    if not block and len(corr_list) != 1:
        raise ValueError("a single grid function takes a single correction")
    lie = StepperConfig(Scheme.LIE, config.h, config.T, config.corner_tol, config.swap_order)
    if all(c.empty for c in corr_list):
        return integrate(u0, g, lie, cache, record=record)

    gfun = _forcing(g)

    def lift(t):
        cols = [c.lift(t) for c in corr_list]
        return np.column_stack(cols) if block else cols[0]

    def lifted_g(t):
        gt = gfun(t)
        if not block:
            return corr_list[0].lifted_forcing(gt, t)
        return np.column_stack([c.lifted_forcing(gt[:, k], t) for k, c in enumerate(corr_list)])

    if not callable(g) and all(c.static for c in corr_list):
        shift = lift(0.0)
        gt = lifted_g(0.0)
        traj = integrate(u0 + shift, gt, lie, cache, record=record)
        return [u - shift for u in traj] if record else traj - shift
    traj = integrate(u0 + lift(0.0), lifted_g, lie, cache, record=True)
    out = [u - lift(k * config.h) for k, u in enumerate(traj)]
    return out if record else out[-1]


# -- reference ------------------------------------------------------------------


def reference_solution(u0, g, t: float, ops: SplitOperators, max_size: int = MAX_DENSE_SIZE) -> np.ndarray:
    """``exp(tL) u0 + t phi_1(tL) g`` with dense matrix functions.

    ``phi_1(z) = (e^z - 1)/z`` is obtained from the exponential of the
    augmented matrix ``[[tL, tG], [0, 0]]``, whose upper-right block is
    ``t phi_1(tL) G``. ``u0`` and ``g`` may be blocks of columns.
    """
    n = ops.grid.size
    if n > max_size:
        raise DenseSizeError(f"dense reference limited to {max_size} unknowns, grid has {n}")
    u0 = np.asarray(u0, dtype=float)
    G = np.asarray(g, dtype=float)
    block = G.ndim == 2
    G2 = G if block else G[:, None]
    U0 = np.broadcast_to(u0 if u0.ndim == 2 else u0[:, None], G2.shape)
    k = G2.shape[1]
    aug = np.zeros((n + k, n + k))
    aug[:n, :n] = t * ops.L.toarray()
    aug[:n, n:] = t * G2
    E = sla.expm(aug)
    out = E[:n, n:]
    if np.any(U0):
        out = out + E[:n, :n] @ U0
    return out if block else out[:, 0]

