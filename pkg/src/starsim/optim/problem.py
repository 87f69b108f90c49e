"""Problem, configuration and solution types shared by the solvers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..channel import ChannelRealization, effective_channels
from ..core import (OperatingProtocol, PhaseShiftModel,
                    TimeSwitchedCoefficients, TrCoefficients, phase_violation)
from ..errors import LengthMismatch, ScenarioMismatch

__all__ = [
    "Objective", "BeamformingProblem", "PenaltyConfig", "TraceEntry",
    "Solution", "evaluate_objective", "sinr", "spectral_efficiency",
]


class Objective(enum.Enum):
    SUM_SPECTRAL_EFFICIENCY = "sum_se"
    TRANSMIT_POWER = "transmit_power"


@dataclass(frozen=True)
class BeamformingProblem:
    """A joint precoder / T&R coefficient design problem.

    ``power_budget`` (W) is required for sum-SE maximisation and
    ``sinr_targets`` (linear) for transmit-power minimisation; the other one
    must be left unset. ``power_cap`` (W) bounds the power the minimum-power
    solvers may spend before declaring the targets infeasible.
    """

    objective: Objective
    channel: ChannelRealization
    noise_power: float
    power_budget: Optional[float] = None
    sinr_targets: Optional[Sequence[float]] = None
    model: PhaseShiftModel = PhaseShiftModel.COUPLED
    protocol: OperatingProtocol = field(default_factory=OperatingProtocol)
    weights: Optional[Sequence[float]] = None
    power_cap: float = 1e6
    n_bs_antennas: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        object.__setattr__(self, "model", PhaseShiftModel(self.model))
        if self.n_bs_antennas is None:
            object.__setattr__(self, "n_bs_antennas", self.channel.n_antennas)
        elif self.n_bs_antennas != self.channel.n_antennas:
            raise LengthMismatch(
                f"n_bs_antennas={self.n_bs_antennas} but channel has {self.channel.n_antennas}")
        if not self.noise_power > 0:
            raise ValueError(f"noise_power must be positive, got {self.noise_power}")
        k = self.channel.n_users
        if self.objective is Objective.SUM_SPECTRAL_EFFICIENCY:
            if self.power_budget is None or self.sinr_targets is not None:
                raise ValueError("sum-SE problems take power_budget and no sinr_targets")
            if self.power_budget < 0:
                raise ValueError("power_budget must be nonnegative")
        else:
            if self.sinr_targets is None or self.power_budget is not None:
                raise ValueError("transmit-power problems take sinr_targets and no power_budget")
            targets = np.asarray(self.sinr_targets, dtype=float)
            if targets.shape != (k,) or np.any(targets <= 0):
                raise ValueError(f"need {k} positive SINR targets, got {self.sinr_targets}")
            object.__setattr__(self, "sinr_targets", tuple(float(v) for v in targets))
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * k)
        elif len(self.weights) != k:
            raise LengthMismatch(f"{len(self.weights)} weights for {k} users")

    @property
    def m(self) -> int:
        return self.channel.m

    @property
    def n_users(self) -> int:
        return self.channel.n_users


@dataclass(frozen=True)
class PenaltyConfig:
    rho0: float = 1e-2
    growth: float = 5.0
    violation_tol: float = 1e-4
    max_outer: int = 20
    inner_tol: float = 1e-5
    max_inner: int = 200

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")


class TraceEntry(NamedTuple):
    outer: int
    inner: int
    objective: float
    max_violation: float
    stage: str = ""


@dataclass
class Solution:
    """Solver output.

    For time switching ``coeffs`` is a :class:`TimeSwitchedCoefficients` and
    ``precoders`` stacks one ``(N, K)`` matrix per slot.
    """

    precoders: np.ndarray
    coeffs: Union[TrCoefficients, TimeSwitchedCoefficients]
    objective_value: float
    trace: List[TraceEntry] = field(default_factory=list)
    iterations: int = 0
    slot_values: Optional[tuple] = None

    @property
    def max_violation(self) -> float:
        if isinstance(self.coeffs, TimeSwitchedCoefficients):
            return max(phase_violation(self.coeffs.transmit), phase_violation(self.coeffs.reflect))
        return phase_violation(self.coeffs)

    def slot(self, index: int) -> "Solution":
        """One time-switching slot as a standalone solution."""
        if not isinstance(self.coeffs, TimeSwitchedCoefficients):
            raise TypeError("not a time-switching solution")
        coeffs = (self.coeffs.transmit, self.coeffs.reflect)[index]
        return Solution(self.precoders[index], coeffs, self.slot_values[index])


def sinr(a: np.ndarray, w: np.ndarray, noise_power: float) -> np.ndarray:
    """Per-user SINR for channel rows ``a`` (K, N) and precoders ``w`` (N, K)."""
    u = np.abs(a @ w) ** 2
    signal = np.diag(u)
    interference = u.sum(axis=1) - signal
    return signal / (interference + noise_power)


def spectral_efficiency(a, w, noise_power, weights=None) -> float:
    rates = np.log2(1.0 + sinr(a, w, noise_power))
    if weights is not None:
        rates = np.asarray(weights) * rates
    return float(np.sum(rates))


def _check_dims(prob: BeamformingProblem, w: np.ndarray, coeffs: TrCoefficients):
    if np.ndim(coeffs.beta_t) != 1 or len(coeffs) != prob.m:
        raise LengthMismatch(f"expected {prob.m} coefficients")
    if w.shape[0] != prob.n_bs_antennas:
        raise LengthMismatch(f"precoders have {w.shape[0]} rows, expected {prob.n_bs_antennas}")


def evaluate_objective(prob: BeamformingProblem, solution: Solution) -> float:
    """Sum spectral efficiency (bit/s/Hz) or total transmit power (W)."""
    w = np.asarray(solution.precoders)
    coeffs = solution.coeffs
    if prob.objective is Objective.TRANSMIT_POWER:
        if isinstance(coeffs, TimeSwitchedCoefficients):
            raise ScenarioMismatch("transmit-power objective does not support time switching")
        _check_dims(prob, w, coeffs)
        return float(np.sum(np.abs(w) ** 2))
    if isinstance(coeffs, TimeSwitchedCoefficients):
        total = 0.0
        for frac, slot_coeffs, slot_w in zip(coeffs.fractions, (coeffs.transmit, coeffs.reflect), w):
            _check_dims(prob, slot_w, slot_coeffs)
            a = effective_channels(prob.channel, slot_coeffs)
            total += frac * spectral_efficiency(a, slot_w, prob.noise_power, prob.weights)
        return total
    _check_dims(prob, w, coeffs)
    if w.shape[1] != prob.n_users:
        raise LengthMismatch(f"precoders have {w.shape[1]} columns, expected {prob.n_users}")
    a = effective_channels(prob.channel, coeffs)
    return spectral_efficiency(a, w, prob.noise_power, prob.weights)
