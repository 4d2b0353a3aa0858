"""Downlink transmit-power minimization with two self-sustainable RIS."""

from .bcd import SolveResult, SolveTrace, bcd_solve, solve_baseline
from .errors import DomainError, ExperimentInfeasible, InfeasibleAtInit, InsufficientHarvest
from .model import Precoder, RisState, check_constraints
from .scenario import ChannelSet, SystemConfig, feasible_defaults, synthesize_scenario

__all__ = [
    "ChannelSet",
    "DomainError",
    "ExperimentInfeasible",
    "InfeasibleAtInit",
    "InsufficientHarvest",
    "Precoder",
    "RisState",
    "SolveResult",
    "SolveTrace",
    "SystemConfig",
    "bcd_solve",
    "check_constraints",
    "feasible_defaults",
    "solve_baseline",
    "synthesize_scenario",
]
