"""Discrete variational solver for weighted fractional p-Laplacian problems."""
from .config import RunConfig, load_config
from .domain import (Field, Grid, HypothesisParams, KernelOperator, build_grid, build_kernel,
                     critical_exponent, exterior_weight, seminorm_p)
from .energy import EnergyContext, build_context, energy, gradient, negative_part_seminorm
from .errors import HypothesisError, SolverError
from .exhaustion import ExhaustionReport, run_exhaustion, uniform_bound
from .model import NonlinearitySpec, WeightSpec, piecewise, plateau_weight, power
from .solvers import SolveReport, minimize_coercive, mountain_pass_solve, mp_geometry

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config",
    "Field", "Grid", "HypothesisParams", "KernelOperator", "build_grid", "build_kernel",
    "critical_exponent", "exterior_weight", "seminorm_p",
    "EnergyContext", "build_context", "energy", "gradient", "negative_part_seminorm",
    "HypothesisError", "SolverError",
    "ExhaustionReport", "run_exhaustion", "uniform_bound",
    "NonlinearitySpec", "WeightSpec", "piecewise", "plateau_weight", "power",
    "SolveReport", "minimize_coercive", "mountain_pass_solve", "mp_geometry",
]
