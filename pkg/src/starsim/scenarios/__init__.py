"""End-to-end experiments binding channels, surfaces and solvers."""

from .experiment import (Aggregate, NetworkScenario, NomaRecord, RunResult, SolverKind,
                         SweepAxis, SweepRow, TrialRecord, UserSpec, apply_axis,
                         build_problem, compare_phase_models, compare_protocols,
                         cophased_coefficients, dbm_to_w, default_scenario, run_noma,
                         run_power_min, run_se_max, run_sweep, w_to_dbm, worker_count)
from .noma import (NomaPair, noma_rates, oma_rates, optimize_noma, optimize_oma,
                   sic_order, split_grid)

__all__ = [
    "Aggregate", "NetworkScenario", "NomaRecord", "RunResult", "SolverKind", "SweepAxis",
    "SweepRow", "TrialRecord", "UserSpec", "apply_axis", "build_problem",
    "compare_phase_models", "compare_protocols", "cophased_coefficients", "dbm_to_w",
    "default_scenario", "run_noma", "run_power_min", "run_se_max", "run_sweep", "w_to_dbm",
    "worker_count", "NomaPair", "noma_rates", "oma_rates", "optimize_noma", "optimize_oma",
    "sic_order", "split_grid",
]
