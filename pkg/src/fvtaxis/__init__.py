"""Finite-volume solver and estimate checks for a degenerate chemotaxis-consumption system."""
from . import kernels
from .config import ConfigError, SimConfig, load, validate
from .errors import (HypothesisViolation, InvariantViolation, NonConvergence, SolverFailure,
                     StepRejected)
from .field import Grid
from .motility import Motility, MotilityBounds, builtin_motility, compute_bounds
from .runner import run, simulate, sweep, sweep_m
from .stepper import ModelParams, State, StepControl, advance

__version__ = "0.1.0"

__all__ = [
    "kernels", "ConfigError", "SimConfig", "load", "validate", "HypothesisViolation",
    "InvariantViolation", "NonConvergence", "SolverFailure", "StepRejected", "Grid",
    "Motility", "MotilityBounds", "builtin_motility", "compute_bounds", "run", "simulate",
    "sweep", "sweep_m", "ModelParams", "State", "StepControl", "advance",
]
