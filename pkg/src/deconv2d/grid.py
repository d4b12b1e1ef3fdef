"""Grid types, discrete norms and vectorization shared by all modules.

A :class:`GridFunction` holds midpoint samples ``x((i - 1/2) h, (j - 1/2) h)``
of a function on the unit square, ``h = 1/n``.  A :class:`DataGrid` holds node
samples ``y(k h, l h)`` on the observation window, either ``[0, 1]^2``
(``n x n`` nodes) or ``[0, 2]^2`` (``2n x 2n`` nodes, the outermost row and
column being identically zero).

Arrays are 0-based internally: ``values[i - 1, j - 1]`` holds ``x_{i,j}``.
Serialized output keeps the 1-based row/column order, which is the same
order as the flattened array.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataCase",
    "GridFunction",
    "DataGrid",
    "data_shape",
    "discrete_l2_norm",
    "discrete_inner",
    "relative_error",
    "vectorize",
    "devectorize",
    "vec_index",
    "write_matrix_csv",
    "read_matrix_csv",
]


class DataCase(str, enum.Enum):
    """Observation window of the autoconvolution data."""

    LIMITED = "limited"
    FULL = "full"

    @classmethod
    def parse(cls, value: "DataCase | str") -> "DataCase":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown data case {value!r}; expected 'limited' or 'full'") from None


def data_shape(n: int, case: DataCase | str) -> tuple[int, int]:
    """Shape of the data lattice for ``n`` cells per axis."""
    case = DataCase.parse(case)
    m = n if case is DataCase.LIMITED else 2 * n
    return (m, m)


def _frozen(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Midpoint samples of a function on ``[0, 1]^2``.

    ``values[i, j]`` is the sample at ``((i + 1/2) h, (j + 1/2) h)`` for
    0-based ``i, j``.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"grid function must be square, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @classmethod
    def constant(cls, n: int, c: float) -> "GridFunction":
        return cls(np.full((n, n), float(c)))

    @classmethod
    def from_function(cls, f, n: int) -> "GridFunction":
        """Sample ``f(t1, t2)`` (vectorized) at the cell midpoints."""
        t = (np.arange(n) + 0.5) / n
        t1, t2 = np.meshgrid(t, t, indexing="ij")
        return cls(np.broadcast_to(f(t1, t2), (n, n)))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self.values)


@dataclass(frozen=True, eq=False)
class DataGrid:
    """Node samples ``y(k h, l h)`` of the autoconvolution on the data window."""

    case: DataCase
    n: int
    values: np.ndarray

    def __post_init__(self):
        case = DataCase.parse(self.case)
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        arr = _frozen(self.values, data_shape(self.n, case))
        if case is DataCase.FULL and (np.any(arr[-1, :] != 0) or np.any(arr[:, -1] != 0)):
            raise ValueError("full-case data must vanish on the outer boundary k = 2n or l = 2n")
        object.__setattr__(self, "case", case)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "values", arr)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _grid_and_h(v) -> tuple[np.ndarray, float]:
    if isinstance(v, GridFunction):
        return v.values, v.h
    if isinstance(v, DataGrid):
        return v.values, v.h
    raise TypeError("expected a GridFunction or DataGrid; pass h explicitly for raw arrays")


def discrete_l2_norm(v, h: float | None = None) -> float:
    """Midpoint-quadrature L2 norm ``h * sqrt(sum v**2)``.

    For raw arrays the grid spacing ``h`` must be given.
    """
    if h is None:
        arr, h = _grid_and_h(v)
    else:
        arr = np.asarray(v, dtype=float)
    return float(h * np.sqrt(np.sum(arr * arr)))


def discrete_inner(u, v, h: float) -> float:
    """Inner product matching :func:`discrete_l2_norm`."""
    return float(h * h * np.vdot(np.asarray(u, dtype=float), np.asarray(v, dtype=float)))


def relative_error(x, xref, h: float | None = None) -> float:
    """``||x - xref|| / ||xref||`` in the discrete L2 norm."""
    if h is None:
        _, h = _grid_and_h(xref)
    x = np.asarray(x, dtype=float)
    xref = np.asarray(xref, dtype=float)
    if x.shape != xref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xref.shape}")
    ref = discrete_l2_norm(xref, h)
    if ref == 0.0:
        raise ZeroDivisionError("reference grid has zero norm")
    return discrete_l2_norm(x - xref, h) / ref


def vec_index(i: int, j: int, n: int) -> int:
    """1-based vector index ``p = (i - 1) n + j`` of the 1-based cell ``(i, j)``."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"cell ({i}, {j}) outside 1..{n}")
    return (i - 1) * n + j


def vectorize(x) -> np.ndarray:
    """Row-major flattening, entry ``p - 1`` holds ``x_{i,j}``."""
    return np.asarray(x, dtype=float).reshape(-1).copy()


def devectorize(v, n: int | None = None, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize` for an ``n x n`` grid (or explicit ``shape``)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if shape is None:
        if n is None:
            n = int(round(np.sqrt(v.size)))
        shape = (n, n)
    if v.size != shape[0] * shape[1]:
        raise ValueError(f"vector of length {v.size} does not fit shape {shape}")
    return v.reshape(shape).copy()


def write_matrix_csv(values, target=None) -> str:
    """Serialize a 2-d array as CSV, one grid row per line, 12 significant digits.

    Returns the text; also writes it to ``target`` (path or text stream) if given.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    lines = [",".join(f"{v:.12g}" for v in row) for row in arr]
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    elif target is not None:
        target.write(text)
    return text


def read_matrix_csv(source) -> np.ndarray:
    """Parse matrix CSV written by :func:`write_matrix_csv` from a path or text stream."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty matrix file")
    try:
        arr = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"malformed matrix CSV: {exc}") from None
    return arr
