"""
crossflux - bifurcation analysis and continuation for the cooperative
Lotka-Volterra system with attractive-transition flux.
"""

__version__ = "0.1.0"

from .enums import BranchKind, BranchSide, CheckGroup, EvolutionOutcome, Regime, TerminationReason
from .errors import (
    BranchSwitchError,
    ConfigError,
    CrossfluxError,
    InvalidParameterError,
    NumericalError,
    RegimeError,
)
from .model import ModelParams, check_weak_cooperative, constant_state
from .types import Branch, BranchPoint, Gamma, Grid, StateVector
from .config import ExperimentConfig, load_config
from .continuation import StepControls, Termination, continue_branch, switch_branch, trace_mode_branch
from .limit import branch_distance, shooting_oracle, trace_scalar_branches
from .evolve import EvolutionControls, evolve

__all__ = [
    "__version__",
    "BranchKind",
    "BranchSide",
    "CheckGroup",
    "EvolutionOutcome",
    "Regime",
    "TerminationReason",
    "BranchSwitchError",
    "ConfigError",
    "CrossfluxError",
    "InvalidParameterError",
    "NumericalError",
    "RegimeError",
    "ModelParams",
    "check_weak_cooperative",
    "constant_state",
    "Branch",
    "BranchPoint",
    "Gamma",
    "Grid",
    "StateVector",
    "ExperimentConfig",
    "load_config",
    "StepControls",
    "Termination",
    "continue_branch",
    "switch_branch",
    "trace_mode_branch",
    "branch_distance",
    "shooting_oracle",
    "trace_scalar_branches",
    "EvolutionControls",
    "evolve",
]
