"""Iteratively regularized Gauss-Newton method on the FFT backend.

Each outer step ``n`` solves the linearized, regularized normal equations by
conjugate gradients, with ``A = F'(x_n)`` and ``b = A x_n + y - F(x_n)``:

* R1: ``(A^T A + alpha_n I) x = A^T b + alpha_n xbar``
* R2: ``(A^T A + alpha_n grad* grad) x = A^T b``

Inner products are Euclidean on the vectorized grids; the quadrature weights
of the discrete norms cancel on both sides.  ``grad* grad`` is the
forward-difference Laplacian scaled by ``1/h^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
import scipy.sparse.linalg as spla

from .grid import DataCase, GridFunction, discrete_l2_norm, relative_error
from .penalties import PenaltyKind, PenaltySpec, difference_laplacian, penalty_value
from .spectral import SpectralOperator
from .tikhonov import SolveRecord, _as_data

__all__ = [
    "IrgnmConfig",
    "CGNotConverged",
    "irgnm_operator",
    "irgnm_step_r1",
    "irgnm_step_r2",
    "irgnm_iterates",
    "irgnm_run",
]

log = logging.getLogger(__name__)

R2_JITTER = 1e-12


class CGNotConverged(RuntimeError):
    """The inner CG solve missed its tolerance."""

    def __init__(self, iterations: int, rel_residual: float):
        super().__init__(f"CG stopped after {iterations} iterations at relative residual {rel_residual:.3e}")
        self.iterations = iterations
        self.rel_residual = rel_residual


@dataclass(frozen=True)
class IrgnmConfig:
    """Outer/inner settings; ``alpha_n = alpha0 * q**n``."""

    alpha0: float = 1.0
    q: float = 0.5
    max_outer: int = 60
    cg_tol: float = 1e-10
    cg_max: int = 2000

    def __post_init__(self):
        if self.alpha0 <= 0 or not 0.0 < self.q < 1.0:
            raise ValueError("need alpha0 > 0 and 0 < q < 1")
        if self.max_outer < 0 or self.cg_tol <= 0 or self.cg_max < 1:
            raise ValueError("invalid IRGNM iteration limits")

    def alpha(self, n: int) -> float:
        return self.alpha0 * self.q ** n

    @property
    def ratio_bound(self) -> float:
        """The constant ``C`` with ``1 <= alpha_n / alpha_{n+1} <= C``."""
        return 1.0 / self.q


def irgnm_operator(op: SpectralOperator, xn: np.ndarray, alpha: float, kind, jitter: float = 0.0) -> Callable:
    """Matrix-free ``u -> (A^T A + alpha P) u + jitter u`` on ``n x n`` grids."""
    kind = PenaltyKind.parse(kind)
    n = op.n
    if kind is PenaltyKind.R1:
        def apply(u):
            return op.normal(xn, u) + (alpha + jitter) * u
    elif kind is PenaltyKind.R2:
        lap = difference_laplacian(n) * (alpha / op.h ** 2)

        def apply(u):
            return op.normal(xn, u) + (lap @ u.reshape(-1)).reshape(n, n) + jitter * u
    else:
        raise ValueError("IRGNM supports only the R1 and R2 penalties")
    return apply


def _cg(apply, rhs: np.ndarray, x0: np.ndarray, cfg: IrgnmConfig) -> tuple[np.ndarray, int, float]:
    n = rhs.shape[0]
    lin = spla.LinearOperator((n * n, n * n), matvec=lambda v: apply(v.reshape(n, n)).reshape(-1), dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    b = rhs.reshape(-1)
    sol, _ = spla.cg(lin, b, x0=x0.reshape(-1), rtol=cfg.cg_tol, atol=0.0, maxiter=cfg.cg_max, callback=cb)
    bnorm = np.linalg.norm(b)
    rel = float(np.linalg.norm(b - lin.matvec(sol)) / bnorm) if bnorm > 0 else 0.0
    return sol.reshape(n, n), count[0], rel


def _rhs(op: SpectralOperator, xn: np.ndarray, y: np.ndarray) -> np.ndarray:
    b = op.derivative(xn, xn) + y - op.forward(xn)
    return op.adjoint(xn, b)


def irgnm_step_r1(op: SpectralOperator, xn, ydelta, alpha: float, xbar, cfg: IrgnmConfig | None = None,
                  *, info: dict | None = None) -> np.ndarray:
    """Solve ``(A^T A + alpha I) x = A^T (A x_n + y - F(x_n)) + alpha xbar`` by CG."""
    cfg = cfg or IrgnmConfig()
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    xn = np.asarray(xn, dtype=float)
    y = np.asarray(ydelta, dtype=float)
    xbar = np.broadcast_to(np.asarray(xbar, dtype=float), xn.shape)
    rhs = _rhs(op, xn, y) + alpha * xbar
    apply = irgnm_operator(op, xn, alpha, PenaltyKind.R1)
    x, its, rel = _cg(apply, rhs, xn, cfg)
    if info is not None:
        info.update(cg_iterations=its, cg_residual=rel, jitter=0.0)
    if not rel <= cfg.cg_tol:
        raise CGNotConverged(its, rel)
    return x


def irgnm_step_r2(op: SpectralOperator, xn, ydelta, alpha: float, cfg: IrgnmConfig | None = None,
                  *, info: dict | None = None) -> np.ndarray:
    """Solve ``(A^T A + alpha grad* grad) x = A^T (A x_n + y - F(x_n))`` by CG.

    If CG stalls (constants close to the joint null space) the solve is
    repeated with ``1e-12 * I`` added to the operator.
    """
    cfg = cfg or IrgnmConfig()
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    xn = np.asarray(xn, dtype=float)
    y = np.asarray(ydelta, dtype=float)
    rhs = _rhs(op, xn, y)
    jitter = 0.0
    x, its, rel = _cg(irgnm_operator(op, xn, alpha, PenaltyKind.R2), rhs, xn, cfg)
    if not rel <= cfg.cg_tol:
        jitter = R2_JITTER
        x, its2, rel = _cg(irgnm_operator(op, xn, alpha, PenaltyKind.R2, jitter), rhs, x, cfg)
        its += its2
    if info is not None:
        info.update(cg_iterations=its, cg_residual=rel, jitter=jitter)
    if not rel <= cfg.cg_tol:
        raise CGNotConverged(its, rel)
    return x


def irgnm_iterates(ydelta, spec: PenaltySpec, x0=None, cfg: IrgnmConfig | None = None, *,
                   case=None, xdagger=None) -> Iterator[SolveRecord]:
    """Yield ``x_0, x_1, ...`` as :class:`SolveRecord` (``index`` = step number).

    ``x_0`` defaults to the constant grid 1.  Record ``n > 0`` carries the
    ``alpha_{n-1}`` that produced it.  Stops after ``cfg.max_outer`` steps;
    callers may stop earlier.
    """
    cfg = cfg or IrgnmConfig()
    y, case, n = _as_data(ydelta, case)
    op = SpectralOperator(n, case)
    if y.shape != op.data_shape:
        raise ValueError(f"data shape {y.shape} does not match {op.data_shape}")
    x = np.ones((n, n)) if x0 is None else np.array(x0, dtype=float)
    if spec.kind is PenaltyKind.R3:
        raise ValueError("IRGNM supports only the R1 and R2 penalties")
    xd = None if xdagger is None else np.asarray(xdagger, dtype=float)

    def record(x, step, alpha, info):
        rec = SolveRecord(
            x=GridFunction(x),
            alpha=alpha,
            residual=discrete_l2_norm(op.forward(x) - y, op.h),
            penalty=penalty_value(spec, x),
            iterations=info.get("cg_iterations", 0),
            converged=True,
            index=step,
            diagnostics=dict(info),
        )
        if xd is not None:
            rec.rel_error = relative_error(x, xd, op.h)
        return rec

    yield record(x, 0, None, {})
    for step in range(cfg.max_outer):
        alpha = cfg.alpha(step)
        info: dict = {}
        if spec.kind is PenaltyKind.R1:
            x = irgnm_step_r1(op, x, y, alpha, spec.reference(n), cfg, info=info)
        else:
            x = irgnm_step_r2(op, x, y, alpha, cfg, info=info)
        yield record(x, step + 1, alpha, info)


def irgnm_run(ydelta, spec: PenaltySpec, cfg: IrgnmConfig | None = None, *, case=None, x0=None,
              xdagger=None, stop: Callable[[list[SolveRecord]], bool] | None = None) -> list[SolveRecord]:
    """Run IRGNM and return the iterate records.

    ``stop(records)`` is consulted after every new iterate; the run ends when
    it returns True or after ``cfg.max_outer`` steps.
    """
    records: list[SolveRecord] = []
    for rec in irgnm_iterates(ydelta, spec, x0, cfg, case=case, xdagger=xdagger):
        records.append(rec)
        if stop is not None and stop(records):
            break
    return records
