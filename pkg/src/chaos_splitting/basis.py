"""Multi-index combinatorics and Fourier-Legendre polynomials.

A multi-index is a tuple of ``m`` non-negative integers. The truncated set
``I_{m,K}`` holds every multi-index of total degree at most ``K`` and is
enumerated by total degree, and within one degree in descending
lexicographic order of the exponent tuples::

    (0,..,0), (1,0,..,0), ..., (0,..,0,1), (2,0,..), (1,1,0,..), ...

This reproduces ``p = 0`` for the zero index, ``p = k`` for the ``k``-th unit
index, the degree-two numbering ``m + (m-1) + ... + (m-k+1) + l`` for
``e_k + e_l`` (``k <= l``) and ``p = P - 1`` for ``(0,..,0,K)``.
"""

from __future__ import annotations

import itertools
import math
import sys
from collections import Counter
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

__all__ = [
    "ChaosBasis",
    "MultiIndex",
    "basis_size",
    "build_basis",
    "fourier_legendre_eval",
    "legendre_eval",
    "legendre_table",
    "second_moment",
    "unit_index",
]


def legendre_eval(n: int, x):
    """Evaluate the Legendre polynomial ``p_n`` at ``x``.

    Uses the three-term recursion
    ``(k+1) p_{k+1} = (2k+1) x p_k - k p_{k-1}``. ``x`` may be a scalar or an
    array. Points outside ``[-1, 1]`` are accepted but the values are then an
    extrapolation of the orthogonal family and grow like ``|x|^n``.
    """
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


def legendre_table(K: int, x) -> np.ndarray:
    """Return ``p_0(x), ..., p_K(x)`` stacked along a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((K + 1,) + x.shape)
    out[0] = 1.0
    if K >= 1:
        out[1] = x
    for k in range(1, K):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def second_moment(alpha: Sequence[int]) -> Fraction:
    """``E[L_alpha^2] = prod_k 1 / (2 alpha_k + 1)`` for uniform ``xi_k`` on [-1, 1]."""
    denom = 1
    for a in alpha:
        if a < 0:
            raise ValueError(f"multi-index entries must be non-negative: {tuple(alpha)}")
        denom *= 2 * a + 1
    return Fraction(1, denom)


def fourier_legendre_eval(alpha: Sequence[int], xi) -> np.ndarray | float:
    """Evaluate ``L_alpha(xi) = prod_i p_{alpha_i}(xi_i)``.

    ``xi`` is a vector of length ``>= `` the position of the last non-zero
    entry of ``alpha``, or an array of shape ``(n_samples, m)`` for a batch.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    support = [(i, a) for i, a in enumerate(alpha) if a != 0]
    needed = support[-1][0] + 1 if support else 0
    if xi.shape[-1] < needed:
        raise ValueError(f"multi-index uses variable {needed}, but xi has only {xi.shape[-1]} entries")
    value = np.ones(xi.shape[:-1]) if xi.ndim > 1 else 1.0
    for i, a in support:
        value = value * legendre_eval(a, xi[..., i])
    return value


def basis_size(m: int, K: int) -> int:
    """Number of multi-indices with ``m`` variables and degree ``<= K``.

    Equals ``(m+K)! / (m! K!)``; evaluated as the exact product
    ``prod_{i=1..K} (m+i)/i`` over Python integers.
    """
    if m < 1 or K < 0:
        raise ValueError(f"need m >= 1 and K >= 0, got m={m}, K={K}")
    P = 1
    for i in range(1, K + 1):
        P = P * (m + i) // i
    if P > sys.maxsize:
        raise OverflowError(f"basis with m={m}, K={K} has {P} terms, more than can be indexed")
    return P


def unit_index(k: int, m: int) -> MultiIndex:
    """The ``k``-th unit multi-index ``e_k`` (1-based ``k``) with ``m`` entries."""
    if not 1 <= k <= m:
        raise ValueError(f"unit index position {k} outside 1..{m}")
    return tuple(1 if i == k - 1 else 0 for i in range(m))


def _supports(m: int, K: int) -> Iterator[tuple[int, ...]]:
    # ascending combinations of variable positions == descending lex order of exponents
    for degree in range(K + 1):
        yield from itertools.combinations_with_replacement(range(m), degree)


class ChaosBasis:
    """Ordered truncated index set ``I_{m,K}`` with its enumeration ``K_m``.

    Multi-indices are stored sparsely (sorted tuples of variable positions,
    one entry per unit of degree) so that large sets such as ``m = 120``,
    ``K = 3`` (302 621 terms) stay cheap. Indexing returns the dense
    ``m``-tuple. Instances are immutable.

    Parameters
    ----------
    m : int
        Number of random variables.
    K : int
        Maximal total polynomial degree.
    """

    __slots__ = ("_m", "_K", "_supports", "_lookup", "_degrees", "_moments")

    def __init__(self, m: int, K: int):
        P = basis_size(m, K)
        supports = tuple(_supports(m, K))
        if len(supports) != P:  # pragma: no cover - guards the enumeration itself
            raise AssertionError(f"enumerated {len(supports)} indices, expected {P}")
        self._m = m
        self._K = K
        self._supports = supports
        self._lookup = {s: p for p, s in enumerate(supports)}
        self._degrees = np.fromiter((len(s) for s in supports), dtype=np.int64, count=P)
        moments = np.empty(P)
        for p, s in enumerate(supports):
            denom = 1
            for a in Counter(s).values():
                denom *= 2 * a + 1
            moments[p] = 1.0 / denom
        moments.flags.writeable = False
        self._degrees.flags.writeable = False
        self._moments = moments

    @property
    def m(self) -> int:
        return self._m

    @property
    def K(self) -> int:
        return self._K

    @property
    def P(self) -> int:
        return len(self._supports)

    def __len__(self) -> int:
        return len(self._supports)

    def __getitem__(self, p: int) -> MultiIndex:
        support = self._supports[p]
        alpha = [0] * self._m
        for i in support:
            alpha[i] += 1
        return tuple(alpha)

    def __iter__(self) -> Iterator[MultiIndex]:
        return (self[p] for p in range(len(self)))

    def __repr__(self) -> str:
        return f"ChaosBasis(m={self._m}, K={self._K}, P={self.P})"

    @property
    def indices(self) -> list[MultiIndex]:
        """All multi-indices in enumeration order (dense tuples)."""
        return list(self)

    @property
    def degrees(self) -> np.ndarray:
        """Total degree ``|alpha|`` of every index, in enumeration order."""
        return self._degrees

    @property
    def second_moments(self) -> np.ndarray:
        """``E[Phi_p^2]`` for every ``p`` as floats."""
        return self._moments

    def second_moment(self, p: int) -> Fraction:
        """Exact ``E[Phi_p^2]`` of the ``p``-th basis polynomial."""
        return second_moment(self[p])

    def support(self, p: int) -> dict[int, int]:
        """Non-zero entries of the ``p``-th index as ``{variable: exponent}`` (0-based)."""
        return dict(Counter(self._supports[p]))

    def index(self, alpha: Sequence[int]) -> int:
        """Inverse enumeration ``K_m(alpha)``.

        Trailing entries beyond ``m`` must be zero.
        """
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative entry in multi-index {tuple(alpha)}")
        if any(alpha[self._m:]):
            raise KeyError(f"{tuple(alpha)} uses more than m={self._m} variables")
        key = tuple(i for i, a in enumerate(alpha[: self._m]) for _ in range(a))
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"{tuple(alpha)} has degree {len(key)} > K={self._K}") from None

    def evaluate(self, p: int, xi) -> np.ndarray | float:
        """Evaluate ``Phi_p`` at ``xi`` (see :func:`fourier_legendre_eval`)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self._m:
            raise ValueError(f"xi must have {self._m} entries per sample, got shape {xi.shape}")
        value = np.ones(xi.shape[:-1]) if xi.ndim > 1 else 1.0
        for i, a in self.support(p).items():
            value = value * legendre_eval(a, xi[..., i])
        return value

    def evaluate_all(self, xi, limit: int | None = None) -> np.ndarray:
        """Evaluate ``Phi_0..Phi_{limit-1}`` at a batch ``xi`` of shape ``(n, m)``.

        Returns an array of shape ``(limit, n)``.
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self._m:
            raise ValueError(f"xi must have {self._m} columns, got {xi.shape[1]}")
        limit = len(self) if limit is None else min(limit, len(self))
        table = legendre_table(self._K, xi.T)  # (K+1, m, n)
        out = np.ones((limit, xi.shape[0]))
        for p in range(limit):
            for i, a in self.support(p).items():
                out[p] *= table[a, i]
        return out


def build_basis(m: int, K: int) -> ChaosBasis:
    """Build the ordered basis of ``I_{m,K}``."""
    return ChaosBasis(m, K)
