"""Joint precoder and T&R coefficient solvers."""

from ..core import phase_violation
from .alternating import alternating_optimize
from .elementwise import element_wise_optimize
from .penalty import penalty_optimize
from .precoding import min_power_precoders, mrt, precoder_update, wmmse
from .problem import (BeamformingProblem, Objective, PenaltyConfig, Solution,
                      TraceEntry, evaluate_objective, sinr, spectral_efficiency)

__all__ = [
    "BeamformingProblem", "Objective", "PenaltyConfig", "Solution", "TraceEntry",
    "penalty_optimize", "alternating_optimize", "element_wise_optimize",
    "precoder_update", "evaluate_objective", "phase_violation", "sinr",
    "spectral_efficiency", "mrt", "wmmse", "min_power_precoders",
]
