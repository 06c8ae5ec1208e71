"""Bohmian trajectories on a 1-D grid and a two-detector model with light-speed delays."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("pilotwave")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.0.0"

from ._accel import available_backends, backend, get_backend, set_backend
from .ensemble import (
    EnsembleStats,
    Outcome,
    OutcomeRecord,
    classify,
    run_nonretarded_ensemble,
    run_retarded_ensemble,
    sample_initial,
    sweep_delay,
)
from .experiment import DetectorState, ExperimentConfig, integrate_pair, integrate_single
from .guidance import Trajectory, integrate_trajectory, quantum_potential, velocity_field
from .retarded import RetardedConfig, integrate_retarded, retarded_time, wrongness_parameter
from .wavefield import Grid1D, Potential1D, WaveFunction1D, propagate

__all__ = [
    "DetectorState",
    "EnsembleStats",
    "ExperimentConfig",
    "Grid1D",
    "Outcome",
    "OutcomeRecord",
    "Potential1D",
    "RetardedConfig",
    "Trajectory",
    "WaveFunction1D",
    "available_backends",
    "backend",
    "classify",
    "get_backend",
    "integrate_pair",
    "integrate_retarded",
    "integrate_single",
    "integrate_trajectory",
    "propagate",
    "quantum_potential",
    "retarded_time",
    "run_nonretarded_ensemble",
    "run_retarded_ensemble",
    "sample_initial",
    "set_backend",
    "sweep_delay",
    "velocity_field",
    "wrongness_parameter",
]
