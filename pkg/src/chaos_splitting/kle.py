"""Truncated Karhunen-Loeve expansion of a spatial random field.

The covariance integral equation is discretized by the Nystrom method with
the grid's quadrature weights ``w`` (see :attr:`Grid2D.quadrature_weights`);
the symmetric matrix ``W^{1/2} C W^{1/2}`` is diagonalized densely.
Eigenfunctions are returned as grid functions that are orthonormal under the
same quadrature, ``sum_x w(x) e_j(x) e_k(x) = delta_jk``.

The random coefficients ``Z_k`` are identified with the chaos variables
``xi_k``, uniform on ``[-1, 1]``, so that a field sample is
``mean + sum_k sqrt(lambda_k) e_k z_k`` with ``z_k`` in ``[-1, 1]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

from .spatial import Grid2D

__all__ = [
    "CovarianceKernel",
    "IndefiniteKernelError",
    "KLExpansion",
    "make_kernel",
    "sample_field",
    "solve_covariance_eigenproblem",
    "write_eigenpairs_csv",
]

NEGATIVE_TOL = 1e-8


class IndefiniteKernelError(ValueError):
    """The discretized covariance has significantly negative eigenvalues."""


@dataclass(frozen=True)
class CovarianceKernel:
    """Symmetric covariance function ``C(x1, x2)`` on the plane.

    ``evaluator`` takes two arrays of points of shape ``(..., 2)``. Stationary
    kernels also set ``profile``, a function of the squared distance, which
    is used to assemble Gram matrices without broadcasting temporaries.
    """

    name: str
    params: dict = field(default_factory=dict)
    evaluator: Callable | None = None
    profile: Callable | None = None

    def __call__(self, x1, x2):
        x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(x1, x2)
        return self.profile(np.sum((x1 - x2) ** 2, axis=-1))

    def gram(self, points: np.ndarray) -> np.ndarray:
        if self.profile is not None:
            C = self.profile(cdist(points, points, "sqeuclidean"))
        else:
            C = self(points[:, None, :], points[None, :, :])
        return 0.5 * (C + C.T)

    @property
    def descriptor(self) -> str:
        args = ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{args}" if args else self.name


def make_kernel(name: str, length_scale: float = 1.0, variance: float = 1.0) -> CovarianceKernel:
    """Kernel by family name.

    ``gaussian``: ``variance * exp(-|x-y|^2 / length_scale^2)``;
    ``exponential``: ``variance * exp(-|x-y| / length_scale)``;
    ``constant``: ``variance``.
    """
    if length_scale <= 0 or variance < 0:
        raise ValueError(f"need length_scale > 0 and variance >= 0, got {length_scale}, {variance}")
    if name == "gaussian":
        prof = lambda d2: variance * np.exp(-d2 / length_scale**2)  # noqa: E731
    elif name == "exponential":
        prof = lambda d2: variance * np.exp(-np.sqrt(d2) / length_scale)  # noqa: E731
    elif name == "constant":
        return CovarianceKernel(name, {"variance": variance}, profile=lambda d2: variance * np.ones_like(d2))
    else:
        raise ValueError(f"unknown kernel family {name!r}; expected gaussian, exponential or constant")
    return CovarianceKernel(name, {"length_scale": length_scale, "variance": variance}, profile=prof)


@dataclass(frozen=True)
class KLExpansion:
    """Mean field plus the ``m`` leading covariance eigenpairs on a grid.

    Attributes
    ----------
    grid : Grid2D
    eigenvalues : ndarray, shape (m,)
        Descending and non-negative.
    eigenfunctions : ndarray, shape (N*N, m)
        Quadrature-orthonormal columns.
    mean : ndarray, shape (N*N,)
    mean_function : callable or None
        Analytic mean ``(x, y) -> value``; used where values off the grid
        (at the domain corners) are needed.
    """

    grid: Grid2D
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mean: np.ndarray
    mean_function: Callable | None = None
    kernel: CovarianceKernel | None = None

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    @property
    def modes(self) -> np.ndarray:
        """``sqrt(lambda_k) e_k`` as columns."""
        return self.eigenfunctions * np.sqrt(self.eigenvalues)

    def truncate(self, m: int) -> "KLExpansion":
        if not 0 <= m <= self.m:
            raise ValueError(f"cannot truncate an expansion with {self.m} terms to {m}")
        return KLExpansion(
            self.grid,
            self.eigenvalues[:m],
            self.eigenfunctions[:, :m],
            self.mean,
            self.mean_function,
            self.kernel,
        )

    def mean_at(self, points: np.ndarray) -> np.ndarray:
        """Mean field at arbitrary points; zero when no analytic mean is attached."""
        points = np.asarray(points, dtype=float)
        if self.mean_function is None:
            return np.zeros(points.shape[0])
        return np.broadcast_to(self.mean_function(points[:, 0], points[:, 1]), points.shape[:1]).astype(float)


def solve_covariance_eigenproblem(
    kernel: CovarianceKernel,
    grid: Grid2D,
    m: int,
    mean_function: Callable | None = None,
) -> KLExpansion:
    """Leading ``m`` eigenpairs of the Nystrom-discretized covariance operator.

    Each eigenfunction is signed so that its first entry of largest magnitude
    is positive. Eigenvalues in ``[-1e-8 * lambda_1, 0)`` are clamped to zero.

    Raises
    ------
    ValueError
        If ``m`` exceeds the number of grid nodes.
    IndefiniteKernelError
        If any eigenvalue lies below ``-1e-8 * lambda_1``.
    """
    n = grid.size
    if not 1 <= m <= n:
        raise ValueError(f"truncation level m={m} must lie in 1..{n} for N={grid.N}")
    sw = np.sqrt(grid.quadrature_weights)
    M = kernel.gram(grid.coordinates)
    M *= sw[:, None]
    M *= sw[None, :]
    values, vectors = sla.eigh(M, overwrite_a=True, check_finite=False)
    values, vectors = values[::-1], vectors[:, ::-1]
    lam1 = values[0]
    if lam1 < 0:
        raise IndefiniteKernelError(f"largest covariance eigenvalue is {lam1:.3e}; kernel is not positive")
    if values[-1] < -NEGATIVE_TOL * lam1:
        raise IndefiniteKernelError(
            f"eigenvalue {values[-1]:.3e} below -{NEGATIVE_TOL:g} * lambda_1; kernel is indefinite"
        )
    lam = np.clip(values[:m], 0.0, None)
    e = vectors[:, :m] / sw[:, None]
    pivot = np.argmax(np.abs(e), axis=0)
    e *= np.where(e[pivot, np.arange(m)] < 0, -1.0, 1.0)
    mean = grid.sample(mean_function) if mean_function is not None else np.zeros(n)
    return KLExpansion(grid, lam, np.ascontiguousarray(e), mean, mean_function, kernel)


def sample_field(kle: KLExpansion, z) -> np.ndarray:
    """``mean + sum_k sqrt(lambda_k) e_k z_k`` on the grid."""
    z = np.asarray(z, dtype=float)
    if z.shape != (kle.m,):
        raise ValueError(f"expected {kle.m} coefficients, got shape {z.shape}")
    return kle.mean + kle.eigenfunctions @ (np.sqrt(kle.eigenvalues) * z)


def write_eigenpairs_csv(kle: KLExpansion, path) -> None:
    """One row per eigenpair: ``k, lambda, e_k`` values in grid storage order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "lambda"] + [f"e{q}" for q in range(kle.grid.size)])
        for k in range(kle.m):
            writer.writerow([k + 1, f"{kle.eigenvalues[k]:.17g}"] + [f"{v:.17g}" for v in kle.eigenfunctions[:, k]])
