"""Test solutions and noisy data synthesis."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .grid import DataCase, DataGrid, GridFunction, discrete_l2_norm
from .midpoint import MidpointOperator

__all__ = ["ExampleId", "example_function", "sample_example", "NoiseModel", "synthesize_data", "case_index"]


class ExampleId(enum.IntEnum):
    EXAMPLE1 = 1
    EXAMPLE2 = 2

    @classmethod
    def parse(cls, value) -> "ExampleId":
        if isinstance(value, cls):
            return value
        text = str(value).lower().removeprefix("example")
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"unknown example {value!r}; expected 1 or 2") from None


def _example1(t1, t2):
    # smooth, nonnegative and factored
    return (-3.0 * t1 ** 2 + 3.0 * t1 + 0.25) * (np.sin(1.5 * np.pi * t2) + 1.0)


def _example2(t1, t2):
    # nonnegative, not factored, kink across t1 = 0.5
    return np.where(t1 <= 0.5, np.sin(1.5 * np.pi * (t1 + t2)) + 1.0, 1.0)


def example_function(example):
    """Closed form ``(t1, t2) -> x(t1, t2)`` of an example solution (vectorized)."""
    return {ExampleId.EXAMPLE1: _example1, ExampleId.EXAMPLE2: _example2}[ExampleId.parse(example)]


def sample_example(example, n: int) -> GridFunction:
    """Midpoint samples of the example solution on an ``n x n`` grid."""
    if n < 1:
        raise ValueError("n must be positive")
    return GridFunction.from_function(example_function(example), n)


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. standard normal perturbation rescaled to relative level ``rho``."""

    rho: float
    seed: int = 0

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"relative noise level must be nonnegative, got {self.rho}")


def case_index(case) -> int:
    return 0 if DataCase.parse(case) is DataCase.LIMITED else 1


def synthesize_data(example, n: int, case, noise: NoiseModel, *, stream: tuple[int, ...] = ()):
    """Exact and noisy data for an example.

    The perturbation lives on interior nodes only (the full-case outer
    boundary stays zero) and is rescaled so that ``||ydelta - y|| = rho ||y||``
    holds exactly in the discrete norm.  ``stream`` selects an independent
    random stream under the same seed.

    Returns
    -------
    y, ydelta : DataGrid
    delta : float
        Absolute noise level ``rho * ||y||``.
    """
    case = DataCase.parse(case)
    x = sample_example(example, n)
    op = MidpointOperator(n, case)
    y = op.forward(x.values)
    h = op.h
    delta = noise.rho * discrete_l2_norm(y, h)
    if noise.rho == 0:
        return DataGrid(case, n, y), DataGrid(case, n, y), 0.0
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed, spawn_key=tuple(stream)))
    e = np.zeros_like(y)
    m = n if case is DataCase.LIMITED else 2 * n - 1
    e[:m, :m] = rng.standard_normal((m, m))
    e *= delta / discrete_l2_norm(e, h)
    return DataGrid(case, n, y), DataGrid(case, n, y + e), delta
