"""Noise sweeps, rule evaluation, Hölder regression and reproduction presets.

A sweep runs one warm-started chain per cell ``(example, case, method,
penalty)`` over decreasing noise levels.  For Tikhonov each noise level
walks the ladder ``alpha_l = alpha0 * q**l`` from ``l = 0``, every solve
starting at the previous solution; the next noise level starts from the
oracle-chosen solution of the previous one.  IRGNM restarts from ``x0`` at
every noise level.  One noise realization per ``(example, case, rho)`` is
shared by all methods and penalties.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy

from .grid import DataCase, GridFunction, relative_error
from .irgnm import CGNotConverged, IrgnmConfig, irgnm_iterates
from .midpoint import MidpointOperator
from .penalties import PenaltyKind, PenaltySpec
from .problems import ExampleId, NoiseModel, case_index, sample_example, synthesize_data
from .rules import NotBracketed, RegGrid, Rule, RuleResult, choose_opt, choose_qo, choose_sdp
from .tikhonov import NewtonConfig, SolveRecord, least_squares_solve, tikhonov_solve

__all__ = [
    "NOISE_LADDER",
    "CSV_COLUMNS",
    "Cell",
    "SweepPlan",
    "CellTrace",
    "SweepRow",
    "SweepReport",
    "run_sweep",
    "noisy_data",
    "holder_fit",
    "IllposednessReport",
    "illposedness_demo",
    "TwofoldnessReport",
    "twofoldness_check",
    "run_manifest",
    "cell_band",
    "KAPPA_TOLERANCE",
    "PRESETS",
    "reproduce",
]

log = logging.getLogger(__name__)

NOISE_LADDER = (0.10, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005)
CSV_COLUMNS = (
    "example", "case", "method", "penalty", "rule",
    "rel_input_error", "rel_output_error", "chosen_param", "iterations", "seed",
)
METHODS = ("tikhonov", "irgnm")
FLOAT_FMT = "{:.12g}"


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    return str(v)


@dataclass(frozen=True)
class Cell:
    """One column of a results table."""

    example: int
    case: str
    method: str
    penalty: str

    def __post_init__(self):
        object.__setattr__(self, "example", int(ExampleId.parse(self.example)))
        object.__setattr__(self, "case", DataCase.parse(self.case).value)
        object.__setattr__(self, "penalty", PenaltyKind.parse(self.penalty).value)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "irgnm" and self.penalty == "r3":
            raise ValueError("IRGNM supports only the r1 and r2 penalties")

    def rules(self) -> tuple[str, ...]:
        return ("opt", "sdp", "qo") if self.method == "tikhonov" else ("opt", "sdp")


@dataclass(frozen=True)
class SweepPlan:
    """Everything that determines a sweep.

    ``cells`` empty means the full cross product of ``examples``, ``cases``,
    ``methods`` and ``penalties`` (skipping IRGNM with r3).  ``rhos`` are
    relative noise levels, run in the given order along each chain.
    """

    examples: tuple[int, ...] = (1, 2)
    cases: tuple[str, ...] = ("limited", "full")
    methods: tuple[str, ...] = METHODS
    penalties: tuple[str, ...] = ("r1", "r2", "r3")
    cells: tuple[Cell, ...] = ()
    rules: tuple[str, ...] = ("opt", "sdp", "qo")
    rhos: tuple[float, ...] = NOISE_LADDER
    n: int = 20
    seed: int = 0
    alpha0: float = 1.0
    q: float = 0.5
    tau: float = 1.2
    beta: float = 0.1
    xbar: float = 0.5
    x0: float = 1.0
    early_exit: bool = True
    qo_tail: int = 3
    max_ladder: int = 40
    max_upward: int = 20
    max_outer: int = 60
    cg_tol: float = 1e-10
    newton_max_iters: int = 200
    newton_grad_tol: float = 1e-8

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if any(r < 0 for r in self.rhos):
            raise ValueError("noise levels must be nonnegative")
        for r in self.rules:
            Rule.parse(r)
        object.__setattr__(self, "cells", tuple(c if isinstance(c, Cell) else Cell(**c) for c in self.cells))

    def all_cells(self) -> list[Cell]:
        if self.cells:
            return list(self.cells)
        out = []
        for ex in self.examples:
            for case in self.cases:
                for method in self.methods:
                    for pen in self.penalties:
                        if method == "irgnm" and PenaltyKind.parse(pen) is PenaltyKind.R3:
                            continue
                        out.append(Cell(int(ex), case, method, pen))
        return out

    @property
    def ladder(self) -> RegGrid:
        return RegGrid(self.alpha0, self.q)

    def spec(self, penalty: str) -> PenaltySpec:
        return PenaltySpec(penalty, xbar=self.xbar, beta=self.beta)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(max_iters=self.newton_max_iters, grad_tol=self.newton_grad_tol)

    def irgnm(self) -> IrgnmConfig:
        return IrgnmConfig(alpha0=self.alpha0, q=self.q, max_outer=self.max_outer, cg_tol=self.cg_tol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cells"] = [asdict(c) for c in self.cells]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SweepPlan":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown plan keys: {sorted(unknown)}")
        kw = dict(data)
        for key in ("examples", "cases", "methods", "penalties", "rules", "rhos"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "cells" in kw:
            kw["cells"] = tuple(c if isinstance(c, Cell) else Cell(**c) if isinstance(c, dict) else Cell(*c)
                                for c in kw["cells"])
        return cls(**kw)


def noisy_data(example: int, n: int, case, rho: float, seed: int):
    """The realization shared by every method at ``(example, case, rho)``."""
    ppm = int(round(rho * 1e6))
    return synthesize_data(example, n, case, NoiseModel(rho, seed), stream=(int(example), case_index(case), ppm))


@dataclass(eq=False)
class CellTrace:
    """All solves at one noise level of one cell, plus the rule choices.

    ``records`` holds ladder positions ``l >= 0`` (Tikhonov) or iterates
    ``n >= 0`` (IRGNM); ``upward`` holds ``l < 0`` solves, added when the
    discrepancy bracket or the error minimum may lie above ``alpha0``.  ``results`` maps a rule name to its
    :class:`RuleResult` or to a failure message.
    """

    cell: Cell
    rho: float
    delta: float
    rel_input_error: float
    records: list[SolveRecord]
    upward: list[SolveRecord] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    note: str = ""

    def sdp_records(self) -> list[SolveRecord]:
        return list(self.upward) + list(self.records)

    def opt_records(self) -> list[SolveRecord]:
        """Tikhonov: the whole evaluated ladder.  IRGNM: iterates ``n >= 1``."""
        if self.cell.method == "irgnm":
            return list(self.records[1:])
        return self.sdp_records()


@dataclass(frozen=True)
class SweepRow:
    example: int
    case: str
    method: str
    penalty: str
    rule: str
    rho: float
    rel_input_error: float
    rel_output_error: float | None
    chosen_param: float | int | None
    iterations: int | None
    seed: int
    status: str = "ok"

    def csv_fields(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def holder_fit(deltas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(delta)``.

    Raises
    ------
    ValueError
        Fewer than four points, mismatched lengths or nonpositive values.
    """
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if d.shape != e.shape or d.ndim != 1:
        raise ValueError("deltas and errors must be 1-d and of equal length")
    if d.size < 4:
        raise ValueError("need at least 4 points for a rate fit")
    if not (np.all(d > 0) and np.all(e > 0)) or not np.all(np.isfinite(d * e)):
        raise ValueError("deltas and errors must be positive and finite")
    slope, _ = np.polyfit(np.log(d), np.log(e), 1)
    return float(slope)


@dataclass(eq=False)
class SweepReport:
    plan: SweepPlan
    rows: list[SweepRow]
    traces: dict = field(default_factory=dict)

    def row(self, example, case, method, penalty, rule, rho) -> SweepRow:
        cell = Cell(int(example), case, method, penalty)
        for r in self.rows:
            if (r.example, r.case, r.method, r.penalty, r.rule) == (cell.example, cell.case, cell.method,
                                                                  cell.penalty, rule) and math.isclose(r.rho, rho):
                return r
        raise KeyError((example, case, method, penalty, rule, rho))

    def kappa(self, cell: Cell, rule: str = "opt") -> float | None:
        """Hölder exponent over the levels with relative error below 1.

        ``None`` when fewer than four levels contribute.
        """
        pts = [(r.rel_input_error, r.rel_output_error) for r in self.rows
               if (r.example, r.case, r.method, r.penalty, r.rule) == (cell.example, cell.case, cell.method,
                                                                      cell.penalty, rule)
               and r.rel_output_error is not None and 0 < r.rel_output_error < 1 and r.rho > 0]
        if len(pts) < 4:
            return None
        d, e = zip(*pts)
        return holder_fit(d, e)

    def kappas(self, rule: str = "opt") -> dict[Cell, float | None]:
        return {c: self.kappa(c, rule) for c in self.plan.all_cells()}

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    def failures(self) -> list[dict]:
        return [asdict(r) for r in self.rows if r.status != "ok"]


# -- chains -----------------------------------------------------------------

def _tikhonov_level(plan: SweepPlan, cell: Cell, ydelta, delta, x_start, xd) -> tuple[list, list, str]:
    spec = plan.spec(cell.penalty)
    cfg = plan.newton()
    grid = plan.ladder
    bound = plan.tau * delta
    records: list[SolveRecord] = []
    x = x_start
    exit_l = None
    sdp_l = None
    note = ""
    for l in range(plan.max_ladder + 1):
        rec = tikhonov_solve(ydelta, grid[l], spec, x, cfg, xdagger=xd, index=l)
        records.append(rec)
        x = rec.x.values
        if exit_l is None and l > 0 and not rec.rel_error < records[-2].rel_error:
            exit_l = l
        if sdp_l is None and rec.residual <= bound:
            sdp_l = l
        if exit_l is not None and sdp_l is not None and l >= max(exit_l, sdp_l) + plan.qo_tail:
            break
    else:
        note = "ladder exhausted"

    # Extend to l < 0 while the discrepancy bracket or the error minimum may lie above.
    upward: list[SolveRecord] = []
    chain = list(records)
    for l in range(-1, -plan.max_upward - 1, -1):
        top = chain[0]
        below = chain[1] if len(chain) > 1 else None
        if not (top.residual <= bound or (below is not None and top.rel_error <= below.rel_error)):
            break
        rec = tikhonov_solve(ydelta, grid[l], spec, top.x.values, cfg, xdagger=xd, index=l)
        upward.insert(0, rec)
        chain.insert(0, rec)
    return records, upward, note


def _irgnm_level(plan: SweepPlan, cell: Cell, ydelta, delta, xd) -> tuple[list, str]:
    spec = plan.spec(cell.penalty)
    bound = plan.tau * delta
    records: list[SolveRecord] = []
    x0 = np.full((plan.n, plan.n), plan.x0)
    exited = reached = False
    note = ""
    try:
        for rec in irgnm_iterates(ydelta, spec, x0, plan.irgnm(), xdagger=xd):
            records.append(rec)
            if len(records) > 2 and not rec.rel_error < records[-2].rel_error:
                exited = True
            if rec.residual <= bound:
                reached = True
            if exited and reached:
                break
    except CGNotConverged as exc:
        note = f"stopped at step {len(records)}: {exc}"
    return records, note


def _rule_results(plan: SweepPlan, trace: CellTrace) -> None:
    # every rule is evaluated: the chain needs "opt" for its warm starts
    for rule in trace.cell.rules():
        try:
            if rule == "opt":
                res = choose_opt(trace.opt_records(), early_exit=plan.early_exit)
            elif rule == "sdp":
                res = choose_sdp(trace.sdp_records(), trace.delta, plan.tau)
            else:
                res = choose_qo(trace.records)
        except (NotBracketed, ValueError) as exc:
            res = f"{type(exc).__name__}: {exc}"
        trace.results[rule] = res


def _run_chain(plan: SweepPlan, cell: Cell) -> list[CellTrace]:
    n = plan.n
    xd = sample_example(cell.example, n).values
    x_start = np.full((n, n), plan.x0)
    out = []
    for rho in plan.rhos:
        y, ydelta, delta = noisy_data(cell.example, n, cell.case, rho, plan.seed)
        rin = relative_error(ydelta.values, y.values, 1.0 / n) if rho > 0 else 0.0
        trace = CellTrace(cell, rho, delta, rin, [])
        try:
            if cell.method == "tikhonov":
                trace.records, trace.upward, trace.note = _tikhonov_level(plan, cell, ydelta, delta, x_start, xd)
            else:
                trace.records, trace.note = _irgnm_level(plan, cell, ydelta, delta, xd)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            trace.note = f"solver failure: {exc}"
        if trace.records:
            _rule_results(plan, trace)
        else:
            trace.results = {r: trace.note for r in cell.rules()}
        opt = trace.results.get("opt")
        if cell.method == "tikhonov" and isinstance(opt, RuleResult):
            x_start = opt.record.x.values
        out.append(trace)
    return out


def _rows(plan: SweepPlan, trace: CellTrace) -> list[SweepRow]:
    c = trace.cell
    rows = []
    for rule in plan.rules:
        if rule not in c.rules():
            continue
        res = trace.results.get(rule)
        if isinstance(res, RuleResult):
            if c.method == "tikhonov":
                chosen, its = res.alpha, res.record.iterations
            else:
                chosen = res.index
                its = int(sum(r.iterations for r in trace.records[1:res.index + 1]))
            rows.append(SweepRow(c.example, c.case, c.method, c.penalty, rule, trace.rho, trace.rel_input_error,
                                 res.rel_error, chosen, its, plan.seed))
        else:
            rows.append(SweepRow(c.example, c.case, c.method, c.penalty, rule, trace.rho, trace.rel_input_error,
                                 None, None, None, plan.seed, status=str(res)))
    return rows


def run_sweep(plan: SweepPlan | None = None, *, jobs: int = 1) -> SweepReport:
    """Run every cell chain of ``plan``; rows come out in plan order.

    Chains are independent and may run in ``jobs`` worker processes; the
    report does not depend on ``jobs``.
    """
    plan = plan or SweepPlan()
    cells = plan.all_cells()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chains = list(pool.map(_run_chain, [plan] * len(cells), cells))
    else:
        chains = [_run_chain(plan, c) for c in cells]
    rows: list[SweepRow] = []
    traces = {}
    for cell, chain in zip(cells, chains):
        for trace in chain:
            traces[(cell, trace.rho)] = trace
            rows.extend(_rows(plan, trace))
    return SweepReport(plan, rows, traces)


# -- demonstrations ---------------------------------------------------------

@dataclass(eq=False)
class IllposednessReport:
    n: int
    rho: float
    seed: int
    limited_error: float
    full_error: float
    limited: SolveRecord
    full: SolveRecord

    @property
    def ratio(self) -> float:
        return self.limited_error / self.full_error


def illposedness_demo(n: int = 20, rho: float = 0.008, *, seed: int = 0, example: int = 1,
                      cfg: NewtonConfig | None = None) -> IllposednessReport:
    """Unregularized least-squares fits in both data cases from ``x0 = 1``."""
    xd = sample_example(example, n).values
    recs = {}
    for case in (DataCase.LIMITED, DataCase.FULL):
        _, ydelta, _ = noisy_data(example, n, case, rho, seed)
        recs[case] = least_squares_solve(ydelta, np.ones((n, n)), cfg, xdagger=xd)
    lim, full = recs[DataCase.LIMITED], recs[DataCase.FULL]
    return IllposednessReport(n, rho, seed, lim.rel_error, full.rel_error, lim, full)


@dataclass(eq=False)
class TwofoldnessReport:
    example: int
    case: str
    forward_discrepancy: float
    plus_errors: list[float]
    minus_errors: list[float]
    mixed_error_plus: float
    mixed_error_minus: float

    @property
    def max_mismatch(self) -> float:
        return float(max(abs(a - b) for a, b in zip(self.plus_errors, self.minus_errors)))


def twofoldness_check(example: int, n: int = 20, *, case="limited", rho: float = 0.01, seed: int = 0,
                      levels: int = 8, alpha0: float = 1.0, q: float = 0.5) -> TwofoldnessReport:
    """Compare the R1 ladder from ``(xbar, x0) = (0.5, 1)`` with its mirror ``(-0.5, -1)``.

    Errors of the mirrored run are measured against ``-x_dagger``.  A run
    from ``x0 = 0`` is recorded against both branches but not judged.
    """
    xd = sample_example(example, n).values
    case = DataCase.parse(case)
    op = MidpointOperator(n, case)
    disc = float(np.max(np.abs(op.forward(xd) - op.forward(-xd))))
    _, ydelta, _ = noisy_data(example, n, case, rho, seed)
    grid = RegGrid(alpha0, q)

    def ladder(xbar, x0, ref):
        spec = PenaltySpec(PenaltyKind.R1, xbar=xbar)
        x = np.full((n, n), x0)
        errs = []
        for l in range(levels):
            rec = tikhonov_solve(ydelta, grid[l], spec, x, xdagger=ref, index=l)
            x = rec.x.values
            errs.append(rec.rel_error)
        return errs, x

    plus, _ = ladder(0.5, 1.0, xd)
    minus, _ = ladder(-0.5, -1.0, -xd)
    _, xmix = ladder(0.5, 0.0, xd)
    return TwofoldnessReport(int(example), case.value, disc, plus, minus,
                             relative_error(xmix, xd, op.h), relative_error(xmix, -xd, op.h))


# -- manifests and presets --------------------------------------------------

def run_manifest(config: dict, **extra) -> dict:
    """Configuration plus library versions; enough to replay a run."""
    from . import __version__

    return {
        "config": config,
        "versions": {
            "deconv2d": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        **extra,
    }


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cell_band(reference_pct: float) -> tuple[float, float]:
    """Acceptance band for a table cell in percent: ``+-40 %`` relative or ``+-2`` points."""
    half = max(0.4 * reference_pct, 2.0)
    return reference_pct - half, reference_pct + half


KAPPA_TOLERANCE = 0.15
FIG3_BANDS = {"limited": (17.0, 70.0), "full": (7.0, 28.0)}
FIG3_REFERENCE = {"limited": 34.54, "full": 13.92}

_T = "tikhonov"
_I = "irgnm"
_TABLE_CELLS = (
    Cell(1, "full", _T, "r1"),
    Cell(1, "limited", _T, "r1"),
    Cell(1, "limited", _T, "r2"),
    Cell(1, "limited", _T, "r3"),
    Cell(1, "limited", _I, "r1"),
    Cell(1, "limited", _I, "r2"),
)

# published relative errors in percent at rho = 1 %, per (cell, rule)
_OUTPUT_REFERENCE = {
    1: {
        ("full", _T, "r1"): {"opt": 2.56, "sdp": 2.71, "qo": 2.71},
        ("limited", _T, "r1"): {"opt": 7.49, "sdp": 9.12, "qo": 9.12},
        ("limited", _T, "r2"): {"opt": 4.32, "sdp": 9.91, "qo": 4.39},
        ("limited", _T, "r3"): {"opt": 9.28, "sdp": 13.77, "qo": 10.30},
        ("limited", _I, "r1"): {"opt": 6.56, "sdp": 9.07},
        ("limited", _I, "r2"): {"opt": 4.19, "sdp": 9.88},
    },
    2: {
        ("full", _T, "r1"): {"opt": 3.22, "sdp": 5.75, "qo": 3.47},
        ("limited", _T, "r1"): {"opt": 6.43, "sdp": 8.59, "qo": 7.23},
        ("limited", _T, "r2"): {"opt": 4.68, "sdp": 7.75, "qo": 5.83},
        ("limited", _T, "r3"): {"opt": 6.01, "sdp": 10.60, "qo": 6.01},
        ("limited", _I, "r1"): {"opt": 5.83, "sdp": 9.06},
        ("limited", _I, "r2"): {"opt": 4.64, "sdp": 8.92},
    },
}

# published Hölder exponents per (case, method, penalty)
_KAPPA_REFERENCE = {
    1: {
        ("full", _T, "r1"): 0.6946, ("full", _T, "r2"): 0.6638, ("full", _T, "r3"): 0.4685,
        ("limited", _T, "r1"): 0.3118, ("limited", _T, "r2"): 0.6015, ("limited", _T, "r3"): 0.3919,
        ("full", _I, "r1"): 0.7184, ("full", _I, "r2"): 0.6936,
        ("limited", _I, "r1"): 0.4088, ("limited", _I, "r2"): 0.6183,
    },
    2: {
        ("full", _T, "r1"): 0.6059, ("full", _T, "r2"): 0.6320, ("full", _T, "r3"): 0.5083,
        ("limited", _T, "r1"): 0.3753, ("limited", _T, "r2"): 0.4522, ("limited", _T, "r3"): 0.3787,
        ("full", _I, "r1"): 0.6699, ("full", _I, "r2"): 0.6705,
        ("limited", _I, "r1"): 0.4164, ("limited", _I, "r2"): 0.4505,
    },
}

TABLE_RHO = 0.01


def output_reference(example: int) -> dict[tuple[Cell, str], float]:
    return {(Cell(example, *key), rule): v
            for key, by_rule in _OUTPUT_REFERENCE[example].items() for rule, v in by_rule.items()}


def kappa_reference(example: int) -> dict[Cell, float]:
    return {Cell(example, *key): v for key, v in _KAPPA_REFERENCE[example].items()}


def _output_plan(example: int, **overrides) -> SweepPlan:
    cells = tuple(replace(c, example=example) for c in _TABLE_CELLS)
    rhos = tuple(r for r in NOISE_LADDER if r >= TABLE_RHO)
    return SweepPlan(cells=cells, rhos=rhos, **overrides)


def _kappa_plan(example: int, **overrides) -> SweepPlan:
    return SweepPlan(cells=tuple(kappa_reference(example)), rules=("opt",), **overrides)


PRESETS = {
    "table1": ("kappa", 1),
    "table2": ("output", 1),
    "table3": ("kappa", 2),
    "table4": ("output", 2),
    "fig3": ("illposed", None),
}


@dataclass
class Verdict:
    label: str
    value: float | None
    reference: float
    low: float
    high: float

    @property
    def passed(self) -> bool:
        return self.value is not None and math.isfinite(self.value) and self.low <= self.value <= self.high

    def line(self) -> str:
        v = "nan" if self.value is None else FLOAT_FMT.format(self.value)
        return (f"{'PASS' if self.passed else 'FAIL'}  {self.label}: {v} "
                f"(reference {self.reference:g}, band [{self.low:.12g}, {self.high:.12g}])")


@dataclass(eq=False)
class Reproduction:
    target: str
    verdicts: list[Verdict]
    csv: str
    config: dict
    report: object = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def reproduce(target: str, *, seed: int = 0, jobs: int = 1, overrides: dict | None = None) -> Reproduction:
    """Run a preset and judge each cell against its reference band."""
    if target not in PRESETS:
        raise ValueError(f"unknown target {target!r}; expected one of {sorted(PRESETS)}")
    kind, example = PRESETS[target]
    overrides = dict(overrides or {})
    overrides["seed"] = seed
    if kind == "illposed":
        n = int(overrides.get("n", 20))
        rho = float(overrides.get("rho", 0.008))
        rep = illposedness_demo(n, rho, seed=seed)
        verdicts = []
        for case, err in (("limited", rep.limited_error), ("full", rep.full_error)):
            lo, hi = FIG3_BANDS[case]
            verdicts.append(Verdict(f"least squares {case}", 100 * err, FIG3_REFERENCE[case], lo, hi))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("case", "rel_input_error", "rel_output_error", "iterations", "converged", "seed"))
        for case, rec in (("limited", rep.limited), ("full", rep.full)):
            w.writerow((case, _fmt(rho), _fmt(rec.rel_error), rec.iterations, rec.converged, seed))
        return Reproduction(target, verdicts, buf.getvalue(), {"n": n, "rho": rho, "seed": seed}, rep)

    plan = _output_plan(example, **overrides) if kind == "output" else _kappa_plan(example, **overrides)
    report = run_sweep(plan, jobs=jobs)
    verdicts = []
    if kind == "output":
        for (cell, rule), ref in output_reference(example).items():
            row = report.row(cell.example, cell.case, cell.method, cell.penalty, rule, TABLE_RHO)
            lo, hi = cell_band(ref)
            val = None if row.rel_output_error is None else 100 * row.rel_output_error
            verdicts.append(Verdict(f"{cell.case}/{cell.method}/{cell.penalty}/{rule}", val, ref, lo, hi))
        csv_text = SweepReport(plan, [r for r in report.rows if math.isclose(r.rho, TABLE_RHO)]).to_csv()
    else:
        for cell, ref in kappa_reference(example).items():
            verdicts.append(Verdict(f"kappa {cell.case}/{cell.method}/{cell.penalty}", report.kappa(cell), ref,
                                    ref - KAPPA_TOLERANCE, ref + KAPPA_TOLERANCE))
        csv_text = report.to_csv()
    return Reproduction(target, verdicts, csv_text, plan.to_dict(), report)
