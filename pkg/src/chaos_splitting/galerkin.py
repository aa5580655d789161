"""Galerkin projection of ``u_t = L u + v + c`` onto the Fourier-Legendre basis.

With the noise written through its KL expansion, the projected equations
decouple into ``(u_p)_t = L u_p + g_p``, ``u_p(0) = 0``, where

* ``g_0 = mean + c``,
* ``g_p = sqrt(lambda_p) e_p`` for ``1 <= p <= m``,
* ``g_p = 0`` for ``p > m``, so those coefficients vanish identically.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .basis import ChaosBasis
from .kle import KLExpansion
from .spatial import CORNERS, Grid2D, SplitOperators, extrapolate_corners

__all__ = ["DeterministicSystem", "galerkin_rhs_check", "project"]


@dataclass(frozen=True)
class DeterministicSystem:
    """The ``P`` decoupled deterministic problems.

    Only the active equations carry data. ``forcing`` holds their
    inhomogeneities as columns, ``corner_values`` the corresponding corner
    values ``g_{p,i}`` (corners ordered counter-clockwise from ``(-1,-1)``).
    Initial data are zero for every ``p``.
    """

    basis: ChaosBasis
    grid: Grid2D
    ops: SplitOperators
    active: tuple[int, ...]
    forcing: np.ndarray
    corner_values: np.ndarray
    forcing_constant: float = 1.0

    @property
    def P(self) -> int:
        return self.basis.P

    @property
    def active_count(self) -> int:
        return len(self.active)

    def is_active(self, p: int) -> bool:
        return p in self._position

    @property
    def _position(self) -> dict[int, int]:
        return {p: c for c, p in enumerate(self.active)}

    def inhomogeneity(self, p: int) -> np.ndarray:
        """``g_p`` on the grid (zeros for inactive ``p``)."""
        if not 0 <= p < self.P:
            raise IndexError(f"equation index {p} outside 0..{self.P - 1}")
        col = self._position.get(p)
        return np.zeros(self.grid.size) if col is None else self.forcing[:, col].copy()

    def initial(self, p: int) -> np.ndarray:
        if not 0 <= p < self.P:
            raise IndexError(f"equation index {p} outside 0..{self.P - 1}")
        return np.zeros(self.grid.size)

    def checksum(self) -> str:
        """SHA-256 over the operators and inhomogeneities."""
        digest = hashlib.sha256()
        for mat in (self.ops.A, self.ops.B):
            for arr in (mat.indptr, mat.indices, mat.data):
                digest.update(np.ascontiguousarray(arr).tobytes())
        digest.update(np.asarray(self.active, dtype=np.int64).tobytes())
        digest.update(np.ascontiguousarray(self.forcing).tobytes())
        return digest.hexdigest()

    def write_summary(self, path) -> None:
        """CSV with ``p, degree, active, forcing_l2`` per equation plus totals."""
        s = self.grid.s
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["P", self.P, "active_count", self.active_count])
            writer.writerow(["p", "degree", "active", "forcing_l2"])
            degrees = self.basis.degrees
            pos = self._position
            for p in range(self.P):
                col = pos.get(p)
                norm = 0.0 if col is None else s * float(np.linalg.norm(self.forcing[:, col]))
                writer.writerow([p, int(degrees[p]), int(col is not None), f"{norm:.17g}"])


def project(
    kle: KLExpansion,
    basis: ChaosBasis,
    ops: SplitOperators,
    forcing_constant: float = 1.0,
) -> DeterministicSystem:
    """Build the projected system for the additive-noise heat problem.

    Equations ``p = 1..kle.m`` whose eigenvalue was clamped to zero are
    inactive, as is every ``p > kle.m``.
    """
    if kle.m > basis.m:
        raise ValueError(f"KL expansion has {kle.m} terms but the basis only {basis.m} variables")
    if kle.grid != ops.grid:
        raise ValueError("KL expansion and operators live on different grids")
    g0 = kle.mean + forcing_constant
    corners0 = kle.mean_at(CORNERS) + forcing_constant
    active = [0]
    columns = [g0]
    corners = [corners0]
    for k in range(1, kle.m + 1):
        lam = kle.eigenvalues[k - 1]
        if lam <= 0:
            continue
        g = np.sqrt(lam) * kle.eigenfunctions[:, k - 1]
        active.append(k)
        columns.append(g)
        corners.append(extrapolate_corners(kle.grid, g))
    forcing = np.column_stack(columns)
    forcing.flags.writeable = False
    corner_values = np.array(corners)
    corner_values.flags.writeable = False
    return DeterministicSystem(basis, kle.grid, ops, tuple(active), forcing, corner_values, float(forcing_constant))


@lru_cache(maxsize=None)
def _legendre_coefficients(n: int) -> tuple[Fraction, ...]:
    """Monomial coefficients of ``p_n`` (lowest degree first), exactly."""
    if n == 0:
        return (Fraction(1),)
    if n == 1:
        return (Fraction(0), Fraction(1))
    prev, cur = _legendre_coefficients(n - 2), _legendre_coefficients(n - 1)
    nxt = [Fraction(0)] * (n + 1)
    for i, c in enumerate(cur):
        nxt[i + 1] += Fraction(2 * n - 1, n) * c
    for i, c in enumerate(prev):
        nxt[i] -= Fraction(n - 1, n) * c
    return tuple(nxt)


def _uniform_moment(power: int) -> Fraction:
    """``E[x^power]`` for ``x`` uniform on [-1, 1]."""
    return Fraction(0) if power % 2 else Fraction(1, power + 1)


def _mixed_moment(extra_power: int, n: int) -> Fraction:
    """``E[x^extra_power * p_n(x)]`` for uniform ``x``."""
    return sum((c * _uniform_moment(i + extra_power) for i, c in enumerate(_legendre_coefficients(n))), Fraction(0))


def galerkin_rhs_check(basis: ChaosBasis, j: int) -> np.ndarray:
    """Projection weights ``E[Z_j Phi_p] / E[Phi_p^2]`` for all ``p``.

    Computed with exact rational moments of the uniform law and independent
    of the enumeration, so the result is the unit vector at ``K_m(e_j)``
    exactly when the basis is consistent.
    """
    if not 1 <= j <= basis.m:
        raise ValueError(f"variable index {j} outside 1..{basis.m}")
    out = np.zeros(basis.P)
    for p in range(basis.P):
        support = basis.support(p)
        if any(var != j - 1 for var in support):
            continue  # E[p_a(xi_k)] = 0 for a >= 1 and k != j
        weight = _mixed_moment(1, support.get(j - 1, 0))
        if weight:
            out[p] = float(weight / basis.second_moment(p))
    return out
