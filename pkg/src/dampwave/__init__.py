"""Damped waves in exterior domains: solvers, energy diagnostics, resolvent sweeps
and ray-based geometric control checks."""
__version__ = "0.1.0"

from .config import ExperimentConfig, parse_config, serialize
from .domain import (BumpKind, ConstantOne, Disk, DomainSpec, ExteriorSmooth, ExteriorWithHole,
                     Table, Zero, build_grid, initial_data, sample_damper)
from .energy import EnergyTrace, conv_bound_ratio, fit_decay, local_energy, theta, total_energy
from .errors import DampwaveError
from .rays import GccReport, Ray, check_egc, check_gcc, trace_ray
from .resolvent import SweepReport, assemble, block_resolvent_apply, low_freq_probe, solve, sweep
from .solver import diffusion_gap, heat_run, run

__all__ = [
    "BumpKind", "ConstantOne", "DampwaveError", "Disk", "DomainSpec", "EnergyTrace",
    "ExperimentConfig", "ExteriorSmooth", "ExteriorWithHole", "GccReport", "Ray", "SweepReport",
    "Table", "Zero", "assemble", "block_resolvent_apply", "build_grid", "check_egc", "check_gcc",
    "conv_bound_ratio", "diffusion_gap", "fit_decay", "heat_run", "initial_data", "local_energy",
    "low_freq_probe", "parse_config", "run", "sample_damper", "serialize", "solve", "sweep",
    "theta", "total_energy", "trace_ray",
]
