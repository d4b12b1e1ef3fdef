"""Tikhonov regularization solved by a damped Newton method.

For fixed ``alpha`` the solver drives the discrete optimality residual ::

    g(x) = 2 h^2 M(x)^T (h^2 M(x) x - y) + alpha R'(x)

to zero.  ``g`` is the gradient of the merit function ::

    phi(x) = 1/2 |F(x) - y|^2 + alpha R(x)

(Euclidean data misfit), which is the quantity used for Armijo backtracking.
In terms of the discrete-norm functional ``||F(x) - y||^2 + a R(x)`` this is
the same minimization with ``a = 2 h^2 alpha``.

The Newton matrix is the exact Hessian
``4 h^4 M^T M + 2 h^2 d[M(x)^T r]/dx + alpha R''(x)``.  When it is not
positive definite, or its step is not a descent direction, that step falls
back to the Gauss-Newton matrix ``4 h^4 M^T M + alpha R''(x)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import DataCase, DataGrid, GridFunction, discrete_l2_norm, relative_error
from .midpoint import MidpointOperator
from .penalties import PenaltySpec, penalty_gradient, penalty_hessian, penalty_value

__all__ = ["NewtonConfig", "SolveRecord", "tikhonov_solve", "least_squares_solve", "optimality_residual"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    """Damped Newton settings.

    ``grad_tol`` bounds the Euclidean norm of the optimality residual;
    ``contraction`` and ``armijo`` control backtracking; steps shorter than
    ``min_step`` end the iteration unconverged.
    """

    max_iters: int = 50
    grad_tol: float = 1e-8
    contraction: float = 0.5
    armijo: float = 1e-4
    min_step: float = 2.0 ** -30

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol <= 0 or self.armijo <= 0 or self.min_step <= 0:
            raise ValueError("NewtonConfig values must be positive")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction must lie in (0, 1)")


@dataclass(eq=False)
class SolveRecord:
    """Result of one regularized solve (or one IRGNM iterate).

    ``alpha`` is the regularization parameter used; ``index`` the ladder
    position ``l`` (Tikhonov) or iteration number ``n`` (IRGNM).
    ``residual`` is the discrete-norm data misfit ``||F(x) - y||``.
    """

    x: GridFunction
    alpha: float | None
    residual: float
    penalty: float
    iterations: int
    converged: bool
    index: int = 0
    objective: float = float("nan")
    grad_norm: float = float("nan")
    rel_error: float | None = None
    diagnostics: dict = field(default_factory=dict)


def _as_data(ydelta, case) -> tuple[np.ndarray, DataCase, int]:
    if isinstance(ydelta, DataGrid):
        if case is not None and DataCase.parse(case) is not ydelta.case:
            raise ValueError(f"case {case!r} does not match data case {ydelta.case.value!r}")
        return ydelta.values, ydelta.case, ydelta.n
    if case is None:
        raise ValueError("case is required when ydelta is a raw array")
    case = DataCase.parse(case)
    y = np.asarray(ydelta, dtype=float)
    n = y.shape[0] if case is DataCase.LIMITED else y.shape[0] // 2
    return y, case, n


def optimality_residual(op: MidpointOperator, y, alpha: float, spec: PenaltySpec | None, x) -> np.ndarray:
    """``2 h^2 M(x)^T (F(x) - y) + alpha R'(x)`` as an ``n x n`` grid."""
    x = np.asarray(x, dtype=float)
    g = op.adjoint(x, op.forward(x) - np.asarray(y, dtype=float))
    if alpha and spec is not None:
        g = g + alpha * penalty_gradient(spec, x)
    return g


def tikhonov_solve(
    ydelta,
    alpha: float,
    spec: PenaltySpec | None,
    x_init,
    cfg: NewtonConfig | None = None,
    *,
    case: DataCase | str | None = None,
    xdagger=None,
    gauss_newton: bool = False,
    index: int = 0,
) -> SolveRecord:
    """Minimize ``1/2 |F(x) - y|^2 + alpha R(x)`` from ``x_init``.

    Parameters
    ----------
    ydelta : DataGrid or ndarray
        Noisy data; with a raw array ``case`` must be given.
    alpha : float
        Regularization parameter, ``>= 0`` (``0`` only for least squares).
    spec : PenaltySpec or None
        Penalty; ignored when ``alpha == 0``.
    x_init : array_like
        Starting grid, ``n x n``.
    cfg : NewtonConfig, optional
    xdagger : array_like, optional
        Exact solution; fills ``rel_error`` when given.
    gauss_newton : bool
        Use the Gauss-Newton matrix for every step.

    Returns
    -------
    SolveRecord
        ``converged`` is True only if the optimality residual fell below
        ``cfg.grad_tol``; otherwise the last accepted iterate is returned.

    Raises
    ------
    FloatingPointError
        If the merit function is not finite at the starting point.
    """
    cfg = cfg or NewtonConfig()
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha > 0 and spec is None:
        raise ValueError("a penalty is required for alpha > 0")
    y, case, n = _as_data(ydelta, case)
    op = MidpointOperator(n, case)
    if y.shape != op.data_shape:
        raise ValueError(f"data shape {y.shape} does not match {op.data_shape}")
    x = np.array(x_init, dtype=float)
    if x.shape != (n, n):
        raise ValueError(f"x_init has shape {x.shape}, expected {(n, n)}")
    h2 = op.h ** 2
    yv = y.reshape(-1)
    use_penalty = alpha > 0

    def merit(xv: np.ndarray):
        grid = xv.reshape(n, n)
        mat = op.matrix(grid)
        # overflow shows up as a non-finite merit, which the caller handles
        with np.errstate(over="ignore", invalid="ignore"):
            r = h2 * (mat @ xv) - yv
            pen = penalty_value(spec, grid) if use_penalty else 0.0
            return 0.5 * float(r @ r) + alpha * pen, mat, r

    xv = x.reshape(-1).copy()
    phi, mat, r = merit(xv)
    if not np.isfinite(phi):
        raise FloatingPointError(f"merit function is not finite at the starting point (phi={phi})")

    converged = False
    fallbacks = 0
    stalled = False
    it = 0
    gnorm = np.inf
    while True:
        g = 2.0 * h2 * (mat.T @ r)
        if use_penalty:
            g = g + alpha * penalty_gradient(spec, xv.reshape(n, n)).reshape(-1)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol:
            converged = True
            break
        if it >= cfg.max_iters:
            break

        h_gn = 4.0 * h2 * h2 * (mat.T @ mat)
        if use_penalty:
            h_gn += alpha * penalty_hessian(spec, xv.reshape(n, n))
        d = None
        if not gauss_newton:
            h_full = h_gn + op.residual_hessian(r.reshape(op.data_shape))
            try:
                d = -sla.cho_solve(sla.cho_factor(h_full, check_finite=False), g, check_finite=False)
            except sla.LinAlgError:
                d = None
            if d is not None and not float(g @ d) < 0.0:
                d = None
            if d is None:
                fallbacks += 1
        if d is None:
            try:
                d = -sla.cho_solve(sla.cho_factor(h_gn, check_finite=False), g, check_finite=False)
            except sla.LinAlgError:
                d = -np.linalg.lstsq(h_gn, g, rcond=None)[0]
        slope = float(g @ d)
        if not slope < 0.0:
            stalled = True
            break

        t = 1.0
        accepted = False
        while t >= cfg.min_step:
            trial = xv + t * d
            phi_t, mat_t, r_t = merit(trial)
            if np.isfinite(phi_t) and phi_t <= phi + cfg.armijo * t * slope:
                accepted = True
                break
            t *= cfg.contraction
        it += 1
        if not accepted:
            stalled = True
            break
        xv, phi, mat, r = trial, phi_t, mat_t, r_t

    x_out = xv.reshape(n, n)
    rec = SolveRecord(
        x=GridFunction(x_out),
        alpha=float(alpha),
        residual=discrete_l2_norm(r, op.h),
        penalty=penalty_value(spec, x_out) if spec is not None else 0.0,
        iterations=it,
        converged=converged,
        index=index,
        objective=phi,
        grad_norm=gnorm,
        diagnostics={"fallback_steps": fallbacks, "stalled": stalled},
    )
    if xdagger is not None:
        rec.rel_error = relative_error(x_out, np.asarray(xdagger, dtype=float), op.h)
    if not converged:
        log.debug("newton stopped unconverged at alpha=%g after %d its, |g|=%.3e", alpha, it, gnorm)
    return rec


def least_squares_solve(ydelta, x_init, cfg: NewtonConfig | None = None, *, case=None, xdagger=None) -> SolveRecord:
    """Unregularized damped Gauss-Newton fit of ``F(x) = ydelta``.

    The system is typically near singular; ``diagnostics["condition"]``
    reports the condition number of ``M(x)`` at the returned point.
    """
    rec = tikhonov_solve(ydelta, 0.0, None, x_init, cfg, case=case, xdagger=xdagger, gauss_newton=True)
    _, case_, n = _as_data(ydelta, case)
    mat = MidpointOperator(n, case_).matrix(rec.x.values)
    rec.diagnostics["condition"] = float(np.linalg.cond(mat))
    return rec
