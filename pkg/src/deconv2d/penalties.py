"""Penalty functionals with gradients and Hessians on midpoint grids.

All three penalties are fixed discrete objects; gradients and Hessians are
exact derivatives of :func:`penalty_value` with respect to the raw grid
values (Euclidean inner product on the vectorized grid).

``R1``
    ``h^2 * sum (x - xbar)^2``, the squared discrete L2 distance to ``xbar``.
``R2``
    ``h^2 * sum |D x|^2`` with forward differences ``D = (neighbour - x) / h``
    over all in-range stencils; equal to the raw squared-difference sum.
``R3``
    Smoothed total variation::

        h * ( sum_{i,j < n} sqrt(dx^2 + dy^2 + h^2 beta^2)
            + sum_{i < n} sqrt(dx[i, n]^2 + h^2 beta^2)
            + sum_{j < n} sqrt(dy[n, j]^2 + h^2 beta^2) )
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "PenaltyKind",
    "PenaltySpec",
    "GradientField",
    "gradient_field",
    "difference_laplacian",
    "penalty_value",
    "penalty_gradient",
    "penalty_hessian",
    "penalty_hessian_apply",
]


class PenaltyKind(str, enum.Enum):
    R1 = "r1"
    R2 = "r2"
    R3 = "r3"

    @classmethod
    def parse(cls, value) -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown penalty {value!r}; expected r1, r2 or r3") from None


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """Which penalty to use and its parameters.

    ``xbar`` is the reference element of R1 (scalar or ``n x n`` array);
    ``beta`` is the R3 smoothing parameter in ``(0, 1)``.
    """

    kind: PenaltyKind
    xbar: float | np.ndarray = 0.5
    beta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind.parse(self.kind))
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        xbar = np.asarray(self.xbar, dtype=float)
        if xbar.ndim not in (0, 2) or not np.all(np.isfinite(xbar)):
            raise ValueError("xbar must be a finite scalar or 2-d grid")
        xbar = xbar.copy()
        xbar.setflags(write=False)
        object.__setattr__(self, "xbar", xbar)

    def reference(self, n: int) -> np.ndarray:
        xbar = np.asarray(self.xbar)
        if xbar.ndim == 0:
            return np.full((n, n), float(xbar))
        if xbar.shape != (n, n):
            raise ValueError(f"xbar has shape {xbar.shape}, expected {(n, n)}")
        return xbar


@dataclass(frozen=True)
class GradientField:
    """Forward differences ``D1 x``, ``D2 x`` (weight ``1/h``), zero-padded to ``n x n``."""

    d1: np.ndarray
    d2: np.ndarray


def gradient_field(x) -> GradientField:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    d1[:-1, :] = (x[1:, :] - x[:-1, :]) * n
    d2[:, :-1] = (x[:, 1:] - x[:, :-1]) * n
    return GradientField(d1, d2)


@lru_cache(maxsize=16)
def _diff_1d(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


@lru_cache(maxsize=16)
def difference_laplacian(n: int) -> sp.csr_matrix:
    """``G^T G`` for the raw forward-difference operator ``G`` (both axes).

    This is the graph Laplacian of the grid with free (Neumann-type) boundary;
    ``grad* grad`` with the ``1/h`` weights equals this matrix divided by ``h^2``.
    Its null space is the constant grids.
    """
    eye = sp.identity(n, format="csr")
    d = _diff_1d(n)
    g1 = sp.kron(d, eye, format="csr")
    g2 = sp.kron(eye, d, format="csr")
    lap = (g1.T @ g1 + g2.T @ g2).tocsr()
    return lap


@lru_cache(maxsize=16)
def _tv_operators(n: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Difference operators ``A``, ``B`` so that the R3 terms are ``sqrt(a^2 + b^2 + c)``.

    Interior terms first (row-major over ``i, j < n - 1``), then the last
    column strip (differences in ``i``), then the last row strip (differences
    in ``j``).  Strip rows of ``B`` are zero.
    """
    idx = np.arange(n * n).reshape(n, n)
    rows_a, cols_a, vals_a = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    t = 0
    for i in range(n - 1):
        for j in range(n - 1):
            rows_a += [t, t]
            cols_a += [idx[i + 1, j], idx[i, j]]
            vals_a += [1.0, -1.0]
            rows_b += [t, t]
            cols_b += [idx[i, j + 1], idx[i, j]]
            vals_b += [1.0, -1.0]
            t += 1
    for i in range(n - 1):
        rows_a += [t, t]
        cols_a += [idx[i + 1, n - 1], idx[i, n - 1]]
        vals_a += [1.0, -1.0]
        t += 1
    for j in range(n - 1):
        rows_a += [t, t]
        cols_a += [idx[n - 1, j + 1], idx[n - 1, j]]
        vals_a += [1.0, -1.0]
        t += 1
    a = sp.csr_matrix((vals_a, (rows_a, cols_a)), shape=(t, n * n))
    b = sp.csr_matrix((vals_b, (rows_b, cols_b)), shape=(t, n * n))
    return a, b


def _tv_parts(x: np.ndarray, beta: float):
    n = x.shape[0]
    h = 1.0 / n
    a_op, b_op = _tv_operators(n)
    v = x.reshape(-1)
    a = a_op @ v
    b = b_op @ v
    s = np.sqrt(a * a + b * b + (h * beta) ** 2)
    return h, a_op, b_op, a, b, s


def _check(spec: PenaltySpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square grid, got shape {x.shape}")
    if spec.kind is PenaltyKind.R1:
        spec.reference(x.shape[0])
    return x


def penalty_value(spec: PenaltySpec, x) -> float:
    x = _check(spec, x)
    n = x.shape[0]
    h = 1.0 / n
    if spec.kind is PenaltyKind.R1:
        d = x - spec.reference(n)
        return float(h * h * np.sum(d * d))
    if spec.kind is PenaltyKind.R2:
        d1 = x[1:, :] - x[:-1, :]
        d2 = x[:, 1:] - x[:, :-1]
        return float(np.sum(d1 * d1) + np.sum(d2 * d2))
    h, _, _, _, _, s = _tv_parts(x, spec.beta)
    return float(h * np.sum(s))


def penalty_gradient(spec: PenaltySpec, x) -> np.ndarray:
    """Gradient of :func:`penalty_value` as an ``n x n`` grid."""
    x = _check(spec, x)
    n = x.shape[0]
    h = 1.0 / n
    if spec.kind is PenaltyKind.R1:
        return 2.0 * h * h * (x - spec.reference(n))
    if spec.kind is PenaltyKind.R2:
        return 2.0 * (difference_laplacian(n) @ x.reshape(-1)).reshape(n, n)
    h, a_op, b_op, a, b, s = _tv_parts(x, spec.beta)
    g = h * (a_op.T @ (a / s) + b_op.T @ (b / s))
    return g.reshape(n, n)


def penalty_hessian(spec: PenaltySpec, x) -> np.ndarray:
    """Dense ``n^2 x n^2`` Hessian of :func:`penalty_value`."""
    x = _check(spec, x)
    n = x.shape[0]
    h = 1.0 / n
    if spec.kind is PenaltyKind.R1:
        return 2.0 * h * h * np.eye(n * n)
    if spec.kind is PenaltyKind.R2:
        return 2.0 * difference_laplacian(n).toarray()
    h, a_op, b_op, a, b, s = _tv_parts(x, spec.beta)
    s3 = s ** 3
    waa = sp.diags(1.0 / s - a * a / s3)
    wbb = sp.diags(1.0 / s - b * b / s3)
    wab = sp.diags(-a * b / s3)
    cross = a_op.T @ wab @ b_op
    hess = a_op.T @ waa @ a_op + b_op.T @ wbb @ b_op + cross + cross.T
    return h * hess.toarray()


def penalty_hessian_apply(spec: PenaltySpec, x, u) -> np.ndarray:
    """Hessian action ``R''(x) u`` as an ``n x n`` grid."""
    x = _check(spec, x)
    u = np.asarray(u, dtype=float)
    if u.shape != x.shape:
        raise ValueError(f"u has shape {u.shape}, expected {x.shape}")
    n = x.shape[0]
    h = 1.0 / n
    if spec.kind is PenaltyKind.R1:
        return 2.0 * h * h * u
    if spec.kind is PenaltyKind.R2:
        return 2.0 * (difference_laplacian(n) @ u.reshape(-1)).reshape(n, n)
    h, a_op, b_op, a, b, s = _tv_parts(x, spec.beta)
    v = u.reshape(-1)
    da = a_op @ v
    db = b_op @ v
    common = (a * da + b * db) / s ** 3
    out = a_op.T @ (da / s - a * common) + b_op.T @ (db / s - b * common)
    return h * out.reshape(n, n)
