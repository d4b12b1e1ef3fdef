"""Two-dimensional deautoconvolution: recover ``x`` on the unit square from ``x * x``."""

from .experiments import Cell, SweepPlan, SweepReport, holder_fit, reproduce, run_sweep
from .grid import DataCase, DataGrid, GridFunction, discrete_l2_norm, relative_error
from .irgnm import CGNotConverged, IrgnmConfig, irgnm_run
from .midpoint import MidpointOperator
from .penalties import PenaltyKind, PenaltySpec
from .problems import ExampleId, NoiseModel, sample_example, synthesize_data
from .rules import NotBracketed, RegGrid, Rule, RuleResult, choose_opt, choose_qo, choose_sdp
from .spectral import SpectralOperator
from .tikhonov import NewtonConfig, SolveRecord, least_squares_solve, tikhonov_solve

__version__ = "0.1.0"

__all__ = [
    "Cell", "SweepPlan", "SweepReport", "holder_fit", "reproduce", "run_sweep",
    "DataCase", "DataGrid", "GridFunction", "discrete_l2_norm", "relative_error",
    "CGNotConverged", "IrgnmConfig", "irgnm_run",
    "MidpointOperator", "SpectralOperator",
    "PenaltyKind", "PenaltySpec",
    "ExampleId", "NoiseModel", "sample_example", "synthesize_data",
    "NotBracketed", "RegGrid", "Rule", "RuleResult", "choose_opt", "choose_qo", "choose_sdp",
    "NewtonConfig", "SolveRecord", "least_squares_solve", "tikhonov_solve",
]
