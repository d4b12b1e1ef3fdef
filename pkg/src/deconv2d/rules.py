"""Parameter choice rules over a geometric ladder ``alpha_l = alpha0 * q**l``.

Solvers produce a trace of :class:`~deconv2d.tikhonov.SolveRecord` objects
ordered by ``index`` (ladder position ``l`` for Tikhonov, iteration number
``n`` for IRGNM).  The rules here only select from such traces, so one sweep
serves all of them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import discrete_l2_norm, relative_error
from .tikhonov import SolveRecord

__all__ = [
    "Rule",
    "RegGrid",
    "TraceEntry",
    "RuleResult",
    "NotBracketed",
    "choose_opt",
    "choose_sdp",
    "choose_qo",
]

DEFAULT_TAU = 1.2


class Rule(str, enum.Enum):
    OPT = "opt"
    SDP = "sdp"
    QO = "qo"

    @classmethod
    def parse(cls, value) -> "Rule":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown rule {value!r}; expected opt, sdp or qo") from None


@dataclass(frozen=True)
class RegGrid:
    """The ladder ``alpha_l = alpha0 * q**l`` for integer ``l`` (negative allowed)."""

    alpha0: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if not self.alpha0 > 0 or not 0.0 < self.q < 1.0:
            raise ValueError("need alpha0 > 0 and 0 < q < 1")

    def __getitem__(self, l: int) -> float:
        return self.alpha0 * self.q ** l

    def values(self, start: int, stop: int) -> np.ndarray:
        return np.array([self[l] for l in range(start, stop)])


class NotBracketed(LookupError):
    """The discrepancy bracket is not inside the evaluated ladder.

    ``direction`` is ``"up"`` when the largest evaluated parameter already
    fits the data (extend to ``alpha0 / q``) and ``"down"`` when no
    evaluated parameter does (extend to smaller ``alpha``).
    """

    def __init__(self, direction: str, message: str):
        super().__init__(message)
        self.direction = direction


@dataclass(frozen=True)
class TraceEntry:
    index: int
    alpha: float | None
    residual: float
    error: float | None = None
    difference: float | None = None


@dataclass(frozen=True)
class RuleResult:
    """A rule's choice: ladder position ``index`` and its ``alpha``.

    For IRGNM traces ``index`` is the stopping index.
    """

    rule: Rule
    index: int
    alpha: float | None
    record: SolveRecord
    trace: tuple[TraceEntry, ...]

    @property
    def rel_error(self) -> float | None:
        return self.record.rel_error


def _ordered(records: Sequence[SolveRecord], minimum: int) -> list[SolveRecord]:
    if len(records) < minimum:
        raise ValueError(f"need at least {minimum} record(s), got {len(records)}")
    recs = sorted(records, key=lambda r: r.index)
    idx = [r.index for r in recs]
    if any(b - a != 1 for a, b in zip(idx, idx[1:])):
        raise ValueError(f"records must be consecutive ladder positions, got {idx}")
    return recs


def _errors(recs: list[SolveRecord], xdagger) -> list[float]:
    out = []
    for r in recs:
        if xdagger is not None:
            out.append(relative_error(r.x.values, np.asarray(xdagger, dtype=float), r.x.h))
        elif r.rel_error is not None:
            out.append(r.rel_error)
        else:
            raise ValueError("choose_opt needs xdagger or records with rel_error")
    return out


def choose_opt(records: Sequence[SolveRecord], xdagger=None, *, early_exit: bool = True) -> RuleResult:
    """Oracle choice: smallest error against the exact solution.

    With ``early_exit`` the ladder is walked from the largest parameter and
    the walk stops at the first step whose error does not strictly decrease;
    the last strict improver is chosen.  Otherwise the full argmin is taken.
    Ties go to the larger parameter in both modes.
    """
    recs = _ordered(records, 1)
    errs = _errors(recs, xdagger)
    if early_exit:
        k = 0
        while k + 1 < len(recs) and errs[k + 1] < errs[k]:
            k += 1
    else:
        k = int(np.argmin(errs))
    trace = tuple(TraceEntry(r.index, r.alpha, r.residual, e) for r, e in zip(recs, errs))
    return RuleResult(Rule.OPT, recs[k].index, recs[k].alpha, recs[k], trace)


def choose_sdp(records: Sequence[SolveRecord], delta: float, tau: float = DEFAULT_TAU) -> RuleResult:
    """Sequential discrepancy principle.

    Picks the first record (largest parameter) with ``residual <= tau * delta``
    whose predecessor on the ladder has ``residual > tau * delta``.

    Raises
    ------
    NotBracketed
        ``direction="up"`` if the first evaluated record already satisfies the
        bound, ``"down"`` if none does.
    """
    if not tau > 1.0:
        raise ValueError("tau must exceed 1")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    recs = _ordered(records, 1)
    bound = tau * delta
    trace = tuple(TraceEntry(r.index, r.alpha, r.residual, r.rel_error) for r in recs)
    for k, r in enumerate(recs):
        if r.residual <= bound:
            if k == 0:
                raise NotBracketed("up", f"residual at index {r.index} is already <= tau*delta")
            return RuleResult(Rule.SDP, r.index, r.alpha, r, trace)
    raise NotBracketed("down", f"no residual <= tau*delta down to index {recs[-1].index}")


def choose_qo(records: Sequence[SolveRecord]) -> RuleResult:
    """Quasi-optimality: the ``alpha_l`` minimizing ``||x_l - x_{l+1}||``.

    Ties go to the larger parameter.
    """
    recs = _ordered(records, 2)
    diffs = [discrete_l2_norm(a.x.values - b.x.values, a.x.h) for a, b in zip(recs, recs[1:])]
    k = int(np.argmin(diffs))
    trace = tuple(
        TraceEntry(r.index, r.alpha, r.residual, r.rel_error, diffs[i] if i < len(diffs) else None)
        for i, r in enumerate(recs)
    )
    return RuleResult(Rule.QO, recs[k].index, recs[k].alpha, recs[k], trace)
