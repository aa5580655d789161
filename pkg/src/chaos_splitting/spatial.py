"""Finite-difference grid, dimension-split operators and cached resolvent solves.

The domain is ``[-1, 1]^2`` with ``N`` interior nodes per direction at
``-1 + i*s``, ``i = 1..N``, ``s = 2/(N+1)``. Grid functions are flat arrays
of length ``N*N`` in row-major order with ``x`` fastest, i.e. node ``(i, j)``
sits at position ``(j-1)*N + (i-1)``. Boundary nodes are never stored; the
homogeneous Dirichlet condition is built into the operators.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Coefficient",
    "Grid2D",
    "ResolventCache",
    "SingularOperatorError",
    "SplitOperators",
    "assemble_operators",
    "resolvent_solve",
    "stationary_solve",
]


class SingularOperatorError(ArithmeticError):
    """A resolvent or stationary operator could not be factorized."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid of ``N x N`` interior nodes on ``[-1, 1]^2``."""

    N: int

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"need at least 2 interior nodes per direction, got N={self.N}")

    @property
    def s(self) -> float:
        return 2.0 / (self.N + 1)

    @property
    def size(self) -> int:
        return self.N * self.N

    @property
    def x(self) -> np.ndarray:
        """1D interior coordinates ``-1 + i*s``, ``i = 1..N``."""
        return -1.0 + self.s * np.arange(1, self.N + 1)

    @property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` of shape ``(N, N)``; row index is ``j`` (y), column index ``i`` (x)."""
        return np.meshgrid(self.x, self.x)

    @property
    def coordinates(self) -> np.ndarray:
        """Node coordinates of shape ``(N*N, 2)`` in storage order."""
        X, Y = self.mesh
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def weights_1d(self) -> np.ndarray:
        """Open extended quadrature weights on the interior nodes of ``[-1, 1]``.

        ``s * (23/12, 7/12, 1, ..., 1, 7/12, 23/12)``: third order and exact
        for constants without using the boundary nodes. Grids with fewer than
        four nodes use the second-order ``s * (3/2, 1, ..., 1, 3/2)``.
        """
        w = np.full(self.N, self.s)
        if self.N >= 4:
            w[[0, -1]] *= 23 / 12
            w[[1, -2]] *= 7 / 12
        else:
            w[[0, -1]] *= 1.5
        return w

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Tensor-product weights in storage order; they sum to 4."""
        w = self.weights_1d
        return np.outer(w, w).ravel()

    def sample(self, func: Callable) -> np.ndarray:
        """Evaluate ``func(x, y)`` on the interior nodes."""
        X, Y = self.mesh
        return np.broadcast_to(np.asarray(func(X, Y), dtype=float), X.shape).ravel().copy()

    def as_matrix(self, u: np.ndarray) -> np.ndarray:
        """View a grid function as an ``(N, N)`` array indexed ``[j, i]``."""
        return np.asarray(u).reshape(self.N, self.N)


# corners numbered counter-clockwise from (-1, -1)
CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def extrapolate_corners(grid: Grid2D, u: np.ndarray) -> np.ndarray:
    """Values at the four domain corners by bilinear extrapolation.

    Each corner value comes from the bilinear interpolant through the nearest
    interior ``2 x 2`` block of nodes, evaluated at the corner. Corners are
    ordered counter-clockwise from ``(-1, -1)``.
    """
    U = grid.as_matrix(u)

    def corner(jj, ii):
        (j0, j1), (i0, i1) = jj, ii
        return 4 * U[j0, i0] - 2 * U[j0, i1] - 2 * U[j1, i0] + U[j1, i1]

    return np.array([
        corner((0, 1), (0, 1)),
        corner((0, 1), (-1, -2)),
        corner((-1, -2), (-1, -2)),
        corner((-1, -2), (0, 1)),
    ])


@dataclass(frozen=True)
class Coefficient:
    """Diffusion coefficient with analytic first partial derivatives.

    ``value``, ``dx`` and ``dy`` are callables of ``(x, y)``. ``descriptor``
    is the textual form used in configuration files.
    """

    value: Callable
    dx: Callable
    dy: Callable
    descriptor: str = "custom"

    @classmethod
    def constant(cls, c: float = 1.0) -> "Coefficient":
        zero = lambda x, y: 0.0 * x  # noqa: E731
        return cls(lambda x, y: c + 0.0 * x, zero, zero, f"constant:{c!r}")

    @classmethod
    def affine(cls, c0: float, cx: float, cy: float) -> "Coefficient":
        """``c0 + cx*x + cy*y``."""
        return cls(
            lambda x, y: c0 + cx * x + cy * y,
            lambda x, y: cx + 0.0 * x,
            lambda x, y: cy + 0.0 * x,
            f"affine:{c0!r},{cx!r},{cy!r}",
        )

    @classmethod
    def parse(cls, text: str) -> "Coefficient":
        """Parse ``constant:<c>`` or ``affine:<c0>,<cx>,<cy>``."""
        family, _, args = text.strip().partition(":")
        try:
            values = [float(v) for v in args.split(",")] if args else []
        except ValueError:
            raise ValueError(f"bad coefficient parameters in {text!r}") from None
        if family == "constant" and len(values) <= 1:
            return cls.constant(*values)
        if family == "affine" and len(values) == 3:
            return cls.affine(*values)
        raise ValueError(f"unknown coefficient descriptor {text!r}; use constant:<c> or affine:<c0>,<cx>,<cy>")


def _tridiag(N: int, lower: float, diag: float, upper: float) -> sp.csr_matrix:
    return sp.diags([np.full(N - 1, lower), np.full(N, diag), np.full(N - 1, upper)], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class SplitOperators:
    """Sparse ``A`` (x-direction), ``B`` (y-direction) and ``L = A + B``."""

    grid: Grid2D
    A: sp.csr_matrix
    B: sp.csr_matrix
    a: Coefficient
    b: Coefficient
    L: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "L", (self.A + self.B).tocsr())

    def matrix(self, name: str) -> sp.csr_matrix:
        try:
            return {"A": self.A, "B": self.B, "L": self.L}[name]
        except KeyError:
            raise KeyError(f"unknown operator {name!r}; expected 'A', 'B' or 'L'") from None

    def write_triplets(self, name: str, path) -> None:
        """Write an operator as ``i j value`` lines (0-based), one non-zero per line."""
        coo = self.matrix(name).tocoo()
        with open(path, "w") as fh:
            fh.write("# i j value\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def assemble_operators(grid: Grid2D, a: Coefficient, b: Coefficient) -> SplitOperators:
    """Assemble the dimension-split stencils with homogeneous Dirichlet data.

    ``(A u)_{ij} = a'_{ij} (u_{i+1,j} - u_{i-1,j}) / (2s) + a_{ij} (u_{i+1,j} - 2u_{ij} + u_{i-1,j}) / s^2``
    and the analogous ``B`` in ``j`` with ``b`` and ``d/dy b``.
    """
    N, s = grid.N, grid.s
    X, Y = grid.mesh
    a_val = np.broadcast_to(a.value(X, Y), X.shape).ravel()
    a_dx = np.broadcast_to(a.dx(X, Y), X.shape).ravel()
    b_val = np.broadcast_to(b.value(X, Y), X.shape).ravel()
    b_dy = np.broadcast_to(b.dy(X, Y), X.shape).ravel()
    if not all(np.all(np.isfinite(c)) for c in (a_val, a_dx, b_val, b_dy)):
        raise ValueError("coefficient values must be finite on the grid")

    second = _tridiag(N, 1.0, -2.0, 1.0) / s**2
    first = _tridiag(N, -1.0, 0.0, 1.0) / (2 * s)
    eye = sp.identity(N, format="csr")
    A = sp.diags(a_val) @ sp.kron(eye, second) + sp.diags(a_dx) @ sp.kron(eye, first)
    B = sp.diags(b_val) @ sp.kron(second, eye) + sp.diags(b_dy) @ sp.kron(first, eye)
    A, B = A.tocsr(), B.tocsr()
    A.eliminate_zeros()
    B.eliminate_zeros()
    return SplitOperators(grid, A, B, a, b)


class ResolventCache:
    """Sparse LU factorizations of ``I - h*M`` (or of ``M`` itself), built once.

    Keys are ``(matrix_id, h)`` with ``matrix_id`` in ``{'A', 'B', 'L'}``;
    ``h=None`` denotes the operator itself, used for stationary solves.
    Lookups after insertion are lock-free; insertion is serialized.
    """

    def __init__(self, ops: SplitOperators):
        self.ops = ops
        self._factors: dict = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._factors)

    def __contains__(self, key) -> bool:
        return key in self._factors

    def factor(self, matrix_id: str, h: float | None):
        key = (matrix_id, None if h is None else float(h))
        lu = self._factors.get(key)
        if lu is not None:
            return lu
        with self._lock:
            lu = self._factors.get(key)
            if lu is None:
                M = self.ops.matrix(matrix_id)
                if h is not None:
                    if not h > 0:
                        raise ValueError(f"step size must be positive, got {h}")
                    M = sp.identity(M.shape[0], format="csr") - h * M
                try:
                    lu = spla.splu(M.tocsc())
                except RuntimeError as exc:
                    raise SingularOperatorError(f"cannot factorize {matrix_id!r} with h={h}: {exc}") from exc
                self._factors[key] = lu
        return lu

    def solve(self, matrix_id: str, h: float | None, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.ops.grid.size:
            raise ValueError(f"right-hand side has {rhs.shape[0]} rows, expected {self.ops.grid.size}")
        out = self.factor(matrix_id, h).solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SingularOperatorError(f"non-finite solution for {matrix_id!r} with h={h}")
        return out


def resolvent_solve(matrix_id: str, h: float, rhs: np.ndarray, cache: ResolventCache) -> np.ndarray:
    """Return ``w`` with ``(I - h*M) w = rhs`` for ``M`` named by ``matrix_id``.

    ``rhs`` may hold several right-hand sides as columns.
    """
    if h is None or not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    return cache.solve(matrix_id, h, rhs)


def stationary_solve(ops: SplitOperators, f: np.ndarray, cache: ResolventCache | None = None) -> np.ndarray:
    """Solve ``L v = f`` with homogeneous Dirichlet data."""
    cache = cache if cache is not None else ResolventCache(ops)
    return cache.solve("L", None, f)
