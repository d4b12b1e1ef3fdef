"""Composite midpoint rule discretization of the 2-d autoconvolution.

Limited data (0-based indices, ``0 <= k, l < n``)::

    y[k, l] = h^2 * sum_{i <= k, j <= l} x[k - i, l - j] * x[i, j]

Full data is the same double sum on the ``2n x 2n`` lattice, where the
sums run over the indices for which both factors lie inside the unit
square; the row ``k = 2n - 1`` and column ``l = 2n - 1`` are identically zero.

In matrix form ``F(x) = h^2 M(x) vec(x)`` and ``F'(x) = 2 h^2 M(x)`` with
``M(x)[(k, l), (i, j)] = x[k - i, l - j]`` whenever ``0 <= k - i, l - j < n``.
Rows of ``M`` follow the row-major order of the data lattice, which for the
full case coincides with the stacking of B- and C-blocks block-row by
block-row.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import DataCase, data_shape

__all__ = ["MidpointOperator", "b_block", "c_block"]


def _correlate_valid(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``out[i, j] = sum_{m} x[m] r[m + (i, j)]`` restricted to ``n x n`` outputs."""
    n = x.shape[0]
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if x[a, b] != 0.0:
                out += x[a, b] * r[a:a + n, b:b + n]
    return out


def _pad_to(r: np.ndarray, m: int) -> np.ndarray:
    if r.shape[0] >= m:
        return r
    out = np.zeros((m, m))
    out[: r.shape[0], : r.shape[1]] = r
    return out


@lru_cache(maxsize=32)
def _matrix_pattern(n: int, m: int):
    """Row, column and source index of every structural nonzero of ``M``."""
    k1, k2, i1, i2 = np.meshgrid(np.arange(m), np.arange(m), np.arange(n), np.arange(n), indexing="ij")
    d1 = k1 - i1
    d2 = k2 - i2
    mask = (d1 >= 0) & (d1 < n) & (d2 >= 0) & (d2 < n)
    rows = (k1 * m + k2)[mask]
    cols = (i1 * n + i2)[mask]
    src = (d1 * n + d2)[mask]
    for a in (rows, cols, src):
        a.setflags(write=False)
    return rows, cols, src


@lru_cache(maxsize=32)
def _hankel_pattern(n: int, m: int):
    i1, i2, j1, j2 = np.meshgrid(*(np.arange(n),) * 4, indexing="ij")
    s1 = i1 + j1
    s2 = i2 + j2
    mask = (s1 < m) & (s2 < m)
    rows = (i1 * n + i2)[mask]
    cols = (j1 * n + j2)[mask]
    src = (s1 * m + s2)[mask]
    for a in (rows, cols, src):
        a.setflags(write=False)
    return rows, cols, src


@dataclass(frozen=True)
class MidpointOperator:
    """Autoconvolution ``x -> x * x`` on an ``n x n`` midpoint grid.

    Parameters
    ----------
    n : int
        Cells per axis, ``h = 1/n``.
    case : DataCase or str
        ``"limited"`` (data on ``[0, 1]^2``) or ``"full"`` (data on ``[0, 2]^2``).
    """

    n: int
    case: DataCase = DataCase.LIMITED

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "case", DataCase.parse(self.case))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def data_shape(self) -> tuple[int, int]:
        return data_shape(self.n, self.case)

    def _grid(self, x, name="x") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.n):
            raise ValueError(f"{name} has shape {x.shape}, expected {(self.n, self.n)}")
        return x

    def _data(self, r, name="r") -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape != self.data_shape:
            raise ValueError(f"{name} has shape {r.shape}, expected {self.data_shape}")
        return r

    def _bilinear(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """``sum x[k - i] u[i]`` on the data lattice (no ``h`` weight)."""
        n = self.n
        m = self.data_shape[0]
        out = np.zeros((2 * n, 2 * n))
        for i in range(n):
            for j in range(n):
                if u[i, j] != 0.0:
                    out[i:i + n, j:j + n] += u[i, j] * x
        return out[:m, :m]

    def forward(self, x) -> np.ndarray:
        """``F(x) = h^2 (x * x)`` sampled on the data lattice."""
        x = self._grid(x)
        return self.h ** 2 * self._bilinear(x, x)

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)

    def derivative(self, x, u) -> np.ndarray:
        """``F'(x) u = 2 h^2 (x * u)``."""
        x = self._grid(x)
        u = self._grid(u, "u")
        return 2.0 * self.h ** 2 * self._bilinear(x, u)

    def adjoint(self, x, r) -> np.ndarray:
        """``F'(x)^T r = 2 h^2 M(x)^T vec(r)`` as an ``n x n`` grid (Euclidean transpose)."""
        x = self._grid(x)
        r = self._data(r)
        return 2.0 * self.h ** 2 * _correlate_valid(x, _pad_to(r, 2 * self.n))

    def matrix(self, x) -> np.ndarray:
        """The block matrix ``M(x)``: ``n^2 x n^2`` (limited) or ``4n^2 x n^2`` (full)."""
        x = self._grid(x)
        m = self.data_shape[0]
        rows, cols, src = _matrix_pattern(self.n, m)
        mat = np.zeros((m * m, self.n * self.n))
        mat[rows, cols] = x.reshape(-1)[src]
        return mat

    def residual_hessian(self, r) -> np.ndarray:
        """Jacobian of ``x -> 2 h^2 M(x)^T vec(r)``, the second-order Newton term.

        Entry ``[(i1, i2), (j1, j2)]`` is ``2 h^2 r[i1 + j1, i2 + j2]``; the matrix
        is symmetric and independent of ``x`` because ``F`` is quadratic.
        """
        r = self._data(r)
        m = self.data_shape[0]
        rows, cols, src = _hankel_pattern(self.n, m)
        mat = np.zeros((self.n * self.n, self.n * self.n))
        mat[rows, cols] = r.reshape(-1)[src]
        return 2.0 * self.h ** 2 * mat


def b_block(x, m: int) -> np.ndarray:
    """Block ``B_m`` (1-based ``m``): lower-triangular Toeplitz built from row ``m`` of ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    row = x[m - 1]
    l, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.where(j <= l, row[np.clip(l - j, 0, n - 1)], 0.0)


def c_block(x, m: int) -> np.ndarray:
    """Block ``C_m`` (1-based ``m``): strictly upper-triangular part continuing ``B_m``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    row = x[m - 1]
    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.where(c > r, row[np.clip(n - (c - r), 0, n - 1)], 0.0)
