"""Monte-Carlo experiments: scenarios, per-trial records and sweeps."""

from __future__ import annotations

import enum
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..channel import (ChannelRealization, Deployment, FadingParams, LinkGeometry, Side,
                       effective_channels, far_field_links, near_field_links, wavelength)
from ..core import (OperatingProtocol, PhaseShiftModel, ProtocolKind, SurfaceConfig,
                    TimeSwitchedCoefficients, TrCoefficients)
from ..errors import InfeasibleTargets, ScenarioMismatch, StarSimError
from ..optim import (BeamformingProblem, Objective, PenaltyConfig, Solution,
                     alternating_optimize, element_wise_optimize, evaluate_objective,
                     penalty_optimize)
from ..optim.problem import sinr
from .noma import optimize_noma, optimize_oma

__all__ = [
    "SolverKind", "SweepAxis", "UserSpec", "NetworkScenario", "default_scenario",
    "TrialRecord", "Aggregate", "RunResult", "SweepRow", "build_problem",
    "run_se_max", "run_power_min", "run_sweep", "run_noma", "compare_phase_models",
    "compare_protocols", "dbm_to_w", "w_to_dbm", "worker_count",
]

THREADS_ENV = "STAR_SIM_THREADS"
SWEEP_SEED_STRIDE = 1000


def dbm_to_w(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def w_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0 if p_w > 0 else -math.inf


class SolverKind(enum.Enum):
    PENALTY = "penalty"
    ALTERNATING = "alternating"
    ELEMENT_WISE = "element_wise"


class SweepAxis(enum.Enum):
    ELEMENTS = "elements"
    BUDGET = "budget"
    DISTANCE = "distance"
    RICIAN_K = "rician_k"


@dataclass(frozen=True)
class UserSpec:
    """A user position (m), its side, and an SINR target (linear) or rate weight."""

    position: Tuple[float, float, float]
    side: Side
    sinr_target: Optional[float] = None
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "side", Side(self.side))
        if self.sinr_target is not None and not self.sinr_target > 0:
            raise ValueError(f"sinr_target must be positive, got {self.sinr_target}")
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class NetworkScenario:
    """Everything needed to regenerate a Monte-Carlo experiment.

    Trial ``i`` draws its channel and seeds its solver with ``seed + i``.
    """

    surface: SurfaceConfig
    bs_position: Tuple[float, float, float]
    n_bs_antennas: int
    users: Tuple[UserSpec, ...]
    noise_power: float
    power_budget: float
    trials: int = 20
    seed: int = 0
    carrier_frequency: float = 3.5e9
    rician_k: float = 3.0
    pathloss_exponent_bs: float = 2.0
    pathloss_exponent_user: float = 2.0
    reference_gain: float = 1e-3
    direct_link: bool = False
    near_field: bool = False

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "bs_position", tuple(float(v) for v in self.bs_position))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.users:
            raise ValueError("a scenario needs at least one user")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if self.power_budget < 0:
            raise ValueError("power_budget must be nonnegative")
        self.deployment()  # validates sides against geometry

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_frequency)

    def deployment(self) -> Deployment:
        links = [LinkGeometry(self.bs_position, u.position, u.side) for u in self.users]
        return Deployment(self.surface, links, self.n_bs_antennas)

    def fading(self) -> FadingParams:
        return FadingParams(self.wavelength, self.rician_k, self.pathloss_exponent_bs,
                            self.pathloss_exponent_user, self.reference_gain, self.direct_link)

    def channel(self, trial: int) -> ChannelRealization:
        gen = near_field_links if self.near_field else far_field_links
        return gen(self.deployment(), self.fading(), self.trial_seed(trial))

    def trial_seed(self, trial: int) -> int:
        return self.seed + trial

    def with_model(self, model: PhaseShiftModel) -> "NetworkScenario":
        return replace(self, surface=self.surface.with_model(model))

    def with_protocol(self, kind: ProtocolKind) -> "NetworkScenario":
        return replace(self, surface=self.surface.with_protocol(OperatingProtocol(kind)))


def default_scenario(**overrides) -> NetworkScenario:
    """Desk-scale instance: 4x4 half-wavelength surface, 4-antenna BS 10 m away,
    one user per side 30 m from the surface, -80 dBm noise, 30 dBm budget."""
    f = 3.5e9
    lam = wavelength(f)
    r = 30.0 / math.sqrt(2.0)
    base = dict(
        surface=SurfaceConfig.planar(16, 4, lam / 2),
        bs_position=(-10.0, 0.0, 0.0),
        n_bs_antennas=4,
        users=(UserSpec((r, r, 0.0), Side.TRANSMISSION, sinr_target=10.0),
               UserSpec((-r, r, 0.0), Side.REFLECTION, sinr_target=10.0)),
        noise_power=dbm_to_w(-80.0),
        power_budget=dbm_to_w(30.0),
        trials=20,
        seed=0,
        carrier_frequency=f,
        rician_k=3.0,
    )
    base.update(overrides)
    return NetworkScenario(**base)


# ---------------------------------------------------------------------------
# Per-trial records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    se: float
    power_w: float
    violation: float
    iterations: int
    wall_ms: float
    feasible: bool = True
    error: str = ""

    @property
    def power_dbm(self) -> float:
        return w_to_dbm(self.power_w)


@dataclass(frozen=True)
class Aggregate:
    """Means and sample standard deviations over feasible trials."""

    n_trials: int
    n_feasible: int
    se_mean: float
    se_std: float
    power_w_mean: float
    power_w_std: float
    violation_max: float
    iterations_mean: float

    @property
    def feasibility_rate(self) -> float:
        return self.n_feasible / self.n_trials if self.n_trials else 0.0

    @property
    def power_dbm_mean(self) -> float:
        return w_to_dbm(self.power_w_mean)

    @classmethod
    def of(cls, records: Sequence[TrialRecord]) -> "Aggregate":
        ok = [r for r in records if r.feasible]

        def stats(vals):
            if not vals:
                return math.nan, math.nan
            arr = np.array(vals, dtype=float)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            return float(arr.mean()), std

        se = stats([r.se for r in ok])
        pw = stats([r.power_w for r in ok])
        return cls(len(records), len(ok), se[0], se[1], pw[0], pw[1],
                   max((r.violation for r in ok), default=math.nan),
                   stats([r.iterations for r in ok])[0])


@dataclass
class RunResult:
    records: List[TrialRecord]
    solutions: List[Optional[Solution]] = field(default_factory=list)

    @property
    def aggregate(self) -> Aggregate:
        return Aggregate.of(self.records)


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def build_problem(sc: NetworkScenario, trial: int, objective: Objective) -> BeamformingProblem:
    ch = sc.channel(trial)
    weights = tuple(u.weight for u in sc.users)
    common = dict(objective=objective, channel=ch, noise_power=sc.noise_power,
                  model=sc.surface.model, protocol=sc.surface.protocol, weights=weights)
    if objective is Objective.SUM_SPECTRAL_EFFICIENCY:
        return BeamformingProblem(power_budget=sc.power_budget, **common)
    targets = [u.sinr_target for u in sc.users]
    if any(t is None for t in targets):
        raise ScenarioMismatch("power minimisation needs an SINR target for every user")
    return BeamformingProblem(sinr_targets=targets, **common)


def _solve(prob: BeamformingProblem, solver: SolverKind, cfg: PenaltyConfig, seed: int):
    if solver is SolverKind.PENALTY:
        return penalty_optimize(prob, cfg, seed)
    if solver is SolverKind.ALTERNATING:
        return alternating_optimize(prob, cfg, seed)
    return element_wise_optimize(prob, seed, inner_tol=cfg.inner_tol)


def _sum_se(prob: BeamformingProblem, sol: Solution) -> float:
    if prob.objective is Objective.SUM_SPECTRAL_EFFICIENCY:
        return evaluate_objective(prob, sol)
    if sol.precoders.shape[1] == 1 and prob.n_users > 1:
        # element-wise solutions broadcast one common signal to both users
        a = effective_channels(prob.channel, sol.coeffs)
        snr = np.abs(a[:, 0]) ** 2 * float(np.abs(sol.precoders[0, 0]) ** 2) / prob.noise_power
        return float(np.sum(np.log2(1.0 + snr)))
    a = effective_channels(prob.channel, sol.coeffs)
    return float(np.sum(np.log2(1.0 + sinr(a, sol.precoders, prob.noise_power))))


def _power(sol: Solution) -> float:
    return float(np.sum(np.abs(sol.precoders) ** 2))


def _trial(args):
    sc, trial, objective, solver, cfg = args
    seed = sc.trial_seed(trial)
    start = time.perf_counter()
    try:
        prob = build_problem(sc, trial, objective)
        sol = _solve(prob, solver, cfg, seed)
    except InfeasibleTargets as exc:
        ms = (time.perf_counter() - start) * 1e3
        return TrialRecord(trial, seed, math.nan, math.nan, math.nan, 0, ms, False,
                           f"infeasible: {exc}"), None
    except ScenarioMismatch:
        raise
    except (StarSimError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        ms = (time.perf_counter() - start) * 1e3
        return TrialRecord(trial, seed, math.nan, math.nan, math.nan, 0, ms, False,
                           f"{type(exc).__name__}: {exc}"), None
    ms = (time.perf_counter() - start) * 1e3
    if isinstance(sol.coeffs, TimeSwitchedCoefficients):
        power = max(_power(Solution(w, c, 0.0)) for w, c in
                    zip(sol.precoders, (sol.coeffs.transmit, sol.coeffs.reflect)))
    else:
        power = _power(sol)
    record = TrialRecord(trial, seed, _sum_se(prob, sol), power, sol.max_violation,
                         sol.iterations, ms)
    return record, sol


def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes for trials, capped by ``STAR_SIM_THREADS``."""
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else 1
    if cap:
        try:
            n = min(n, int(cap)) if requested is not None else int(cap)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, n)


def _run(sc: NetworkScenario, objective: Objective, solver: SolverKind, cfg: PenaltyConfig,
         workers: Optional[int]) -> RunResult:
    jobs = [(sc, i, objective, solver, cfg) for i in range(sc.trials)]
    n = worker_count(workers)
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            # map preserves trial order, so aggregation is order-fixed
            out = list(pool.map(_trial, jobs))
    else:
        out = [_trial(job) for job in jobs]
    return RunResult([r for r, _ in out], [s for _, s in out])


def run_se_max(sc: NetworkScenario, solver: SolverKind = SolverKind.PENALTY,
               model: Optional[PhaseShiftModel] = None, cfg: PenaltyConfig = PenaltyConfig(),
               workers: Optional[int] = None) -> RunResult:
    """Sum-SE maximisation on ``sc.trials`` fresh channel realisations.

    ``model`` overrides the surface's phase-shift model. Solver failures
    are recorded per trial; a solver that cannot handle the scenario shape
    raises :class:`ScenarioMismatch`.
    """
    solver = SolverKind(solver)
    if solver is SolverKind.ELEMENT_WISE:
        raise ScenarioMismatch("the element-wise solver only minimises transmit power")
    if model is not None:
        sc = sc.with_model(PhaseShiftModel(model))
    return _run(sc, Objective.SUM_SPECTRAL_EFFICIENCY, solver, cfg, workers)


def run_power_min(sc: NetworkScenario, solver: SolverKind = SolverKind.ELEMENT_WISE,
                  model: Optional[PhaseShiftModel] = None, cfg: PenaltyConfig = PenaltyConfig(),
                  workers: Optional[int] = None) -> RunResult:
    """Transmit-power minimisation under the users' SINR targets.

    Infeasible trials are kept with ``feasible=False``.
    """
    solver = SolverKind(solver)
    if model is not None:
        sc = sc.with_model(PhaseShiftModel(model))
    if solver is SolverKind.ELEMENT_WISE:
        sides = sorted(u.side.value for u in sc.users)
        if sides != ["reflection", "transmission"] or sc.n_bs_antennas != 1:
            raise ScenarioMismatch(
                "element-wise power minimisation needs one BS antenna and one user per side")
    return _run(sc, Objective.TRANSMIT_POWER, solver, cfg, workers)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    axis: SweepAxis
    value: float
    aggregate: Aggregate
    records: Tuple[TrialRecord, ...]


def _grid_columns(m: int) -> int:
    c = int(math.isqrt(m))
    while m % c:
        c -= 1
    return max(m // c, c)


def apply_axis(sc: NetworkScenario, axis: SweepAxis, value: float) -> NetworkScenario:
    """Scenario with one parameter replaced.

    Elements keeps a near-square half-wavelength grid; Budget is in watts;
    Distance moves every user radially to that distance (m) from the
    surface centre; RicianK is linear.
    """
    axis = SweepAxis(axis)
    if axis is SweepAxis.ELEMENTS:
        m = int(value)
        if m != value or m < 1:
            raise ValueError(f"element count must be a positive integer, got {value}")
        surf = SurfaceConfig.planar(m, _grid_columns(m), sc.wavelength / 2,
                                    center=tuple(sc.surface.center), model=sc.surface.model,
                                    protocol=sc.surface.protocol, normal=sc.surface.normal)
        return replace(sc, surface=surf)
    if axis is SweepAxis.BUDGET:
        return replace(sc, power_budget=float(value))
    if axis is SweepAxis.DISTANCE:
        if not value > 0:
            raise ValueError("distance must be positive")
        c = sc.surface.center
        users = []
        for u in sc.users:
            v = np.asarray(u.position) - c
            users.append(replace(u, position=tuple(c + v / np.linalg.norm(v) * value)))
        return replace(sc, users=tuple(users))
    return replace(sc, rician_k=float(value))


def _check_values(values) -> List[float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("sweep values must be non-empty")
    diffs = np.diff(vals)
    if len(vals) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError(f"sweep values must be strictly monotone, got {vals}")
    return vals


def run_sweep(base: NetworkScenario, axis: SweepAxis, values: Sequence[float],
              solver: SolverKind = SolverKind.PENALTY, objective: Objective = Objective.SUM_SPECTRAL_EFFICIENCY,
              model: Optional[PhaseShiftModel] = None, cfg: PenaltyConfig = PenaltyConfig(),
              seed_policy: str = "offset", workers: Optional[int] = None) -> List[SweepRow]:
    """One aggregated row per axis value.

    ``seed_policy="offset"`` shifts the seed by ``SWEEP_SEED_STRIDE`` per
    value for independent draws; ``"common"`` reuses the base seeds at every
    value, so rows differ only in the swept parameter.
    """
    axis = SweepAxis(axis)
    objective = Objective(objective)
    if seed_policy not in ("common", "offset"):
        raise ValueError(f"seed_policy must be 'common' or 'offset', got {seed_policy!r}")
    rows = []
    for i, v in enumerate(_check_values(values)):
        sc = apply_axis(base, axis, v)
        if seed_policy == "offset":
            sc = replace(sc, seed=base.seed + i * SWEEP_SEED_STRIDE)
        if objective is Objective.SUM_SPECTRAL_EFFICIENCY:
            res = run_se_max(sc, solver, model, cfg, workers)
        else:
            res = run_power_min(sc, solver, model, cfg, workers)
        rows.append(SweepRow(axis, v, res.aggregate, tuple(res.records)))
    return rows


# ---------------------------------------------------------------------------
# Model and protocol comparisons with explicit warm starts
# ---------------------------------------------------------------------------

def compare_phase_models(prob: BeamformingProblem, cfg: PenaltyConfig = PenaltyConfig(),
                         seed: int = 0):
    """Coupled and independent penalty solutions for one instance.

    The independent result is the better of a cold start and a warm start
    from the coupled solution, so it reflects the inclusion of the coupled
    feasible set in the independent one. Returns ``(coupled, independent)``.
    """
    coupled = penalty_optimize(replace(prob, model=PhaseShiftModel.COUPLED), cfg, seed)
    ind_prob = replace(prob, model=PhaseShiftModel.INDEPENDENT)
    cold = penalty_optimize(ind_prob, cfg, seed)
    warm = penalty_optimize(ind_prob, cfg, seed, init=coupled)
    return coupled, max(cold, warm, key=lambda s: s.objective_value)


def compare_protocols(prob: BeamformingProblem, cfg: PenaltyConfig = PenaltyConfig(),
                      seed: int = 0):
    """Energy-splitting, mode-switching and time-switching solutions.

    Mode and time switching restrict the energy-splitting feasible set, so
    the energy-splitting result is the best of a cold start and warm starts
    from the mode-switching solution and the better time-switching slot.
    Returns a dict keyed by :class:`ProtocolKind`.
    """
    if prob.objective is not Objective.SUM_SPECTRAL_EFFICIENCY:
        raise ScenarioMismatch("protocol comparison is defined for sum-SE maximisation")

    def with_kind(kind):
        return replace(prob, protocol=OperatingProtocol(kind))

    es_prob = with_kind(ProtocolKind.ENERGY_SPLITTING)
    ms = penalty_optimize(with_kind(ProtocolKind.MODE_SWITCHING), cfg, seed)
    ts = penalty_optimize(with_kind(ProtocolKind.TIME_SWITCHING), cfg, seed)
    best_slot = ts.slot(int(np.argmax(ts.slot_values)))
    candidates = [penalty_optimize(es_prob, cfg, seed),
                  penalty_optimize(es_prob, cfg, seed, init=ms),
                  penalty_optimize(es_prob, cfg, seed, init=best_slot)]
    es = max(candidates, key=lambda s: s.objective_value)
    return {ProtocolKind.ENERGY_SPLITTING: es, ProtocolKind.MODE_SWITCHING: ms,
            ProtocolKind.TIME_SWITCHING: ts}


# ---------------------------------------------------------------------------
# NOMA pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NomaRecord:
    trial: int
    seed: int
    gain_t: float
    gain_r: float
    alpha: float
    noma_sum_rate: float
    tau: float
    oma_sum_rate: float


def cophased_coefficients(ch: ChannelRealization) -> TrCoefficients:
    """Even split; transmission phases co-phase the transmission user's
    cascade and reflection phases follow under the coupled model."""
    kt = ch.user_on(Side.TRANSMISSION)
    casc = ch.h[kt] * ch.g[:, 0]
    phi_t = np.angle(ch.d[kt, 0]) - np.angle(casc) if np.any(ch.d[kt]) else -np.angle(casc)
    return TrCoefficients.from_split_angle(np.full(ch.m, np.pi / 4), phi_t, phi_t + np.pi / 2)


def run_noma(sc: NetworkScenario) -> List[NomaRecord]:
    """NOMA versus OMA sum-rate for a transmission/reflection user pair.

    Needs one BS antenna and exactly one user per side; the surface uses
    :func:`cophased_coefficients`.
    """
    sides = sorted(u.side.value for u in sc.users)
    if sides != ["reflection", "transmission"] or sc.n_bs_antennas != 1:
        raise ScenarioMismatch("NOMA pairing needs one BS antenna and one user per side")
    out = []
    for i in range(sc.trials):
        ch = sc.channel(i)
        a = effective_channels(ch, cophased_coefficients(ch))[:, 0]
        kt, kr = ch.user_on(Side.TRANSMISSION), ch.user_on(Side.REFLECTION)
        gains = (float(abs(a[kt]) ** 2), float(abs(a[kr]) ** 2))
        alpha, noma = optimize_noma(gains, sc.power_budget, sc.noise_power)
        tau, oma = optimize_oma(gains, sc.power_budget, sc.noise_power)
        out.append(NomaRecord(i, sc.trial_seed(i), gains[0], gains[1], alpha, noma, tau, oma))
    return out
