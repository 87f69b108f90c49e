"""Two-user NOMA pairing of a transmission-side and a reflection-side user.

Gains are effective power gains ``|h|^2`` after the surface. The stronger
user performs successive interference cancellation: it decodes the weaker
user's signal first and then its own, so only the weaker user sees
interference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .._search import golden_section_max
from ..errors import DegenerateChannel

__all__ = [
    "NomaPair", "sic_order", "noma_rates", "oma_rates", "optimize_noma",
    "optimize_oma", "MIN_GAIN", "split_grid",
]

MIN_GAIN = 1e-15
GRID_POINTS = 256


def sic_order(gains: Sequence[float]) -> Tuple[int, int]:
    """``(strong, weak)`` positions in ``gains``; ties keep the first as strong."""
    g0, g1 = float(gains[0]), float(gains[1])
    return (0, 1) if g0 >= g1 else (1, 0)


@dataclass(frozen=True)
class NomaPair:
    """A NOMA cluster of one transmission-side and one reflection-side user.

    ``power_split`` is the fraction of transmit power given to the
    stronger user; the rest goes to the weaker one.
    """

    transmit_user: int = 0
    reflect_user: int = 1
    power_split: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.power_split < 1.0:
            raise ValueError(f"power_split must lie in (0, 1), got {self.power_split}")
        if self.transmit_user == self.reflect_user:
            raise ValueError("a NOMA pair needs two distinct users")

    def decoding_order(self, gains: Sequence[float]) -> Tuple[int, int]:
        """User labels in SIC order: strong user first, then weak.

        ``gains`` are ordered as (transmit_user, reflect_user).
        """
        users = (self.transmit_user, self.reflect_user)
        s, w = sic_order(gains)
        return users[s], users[w]


def _check_gains(gains):
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (2,):
        raise ValueError("exactly two gains are required")
    if np.any(gains < MIN_GAIN):
        raise DegenerateChannel(f"effective gain below {MIN_GAIN:g}: {gains.tolist()}")
    return gains


def noma_rates(pair: NomaPair, gains: Sequence[float], power: float, noise: float):
    """Rates ``(strong, weak)`` in bit/s/Hz for a NOMA pair.

    Parameters
    ----------
    pair : NomaPair
    gains : sequence of 2 floats
        Effective power gains of (transmit_user, reflect_user).
    power : float
        Total transmit power (W).
    noise : float
        Noise power (W).

    Raises
    ------
    DegenerateChannel
        If either gain is below ``MIN_GAIN``.
    """
    gains = _check_gains(gains)
    s, w = sic_order(gains)
    a = pair.power_split
    snr_s = power * gains[s] / noise
    snr_w = power * gains[w] / noise
    weak = np.log2(1.0 + (1.0 - a) * snr_w / (a * snr_w + 1.0))
    strong = np.log2(1.0 + a * snr_s)
    return float(strong), float(weak)


def oma_rates(gains: Sequence[float], power: float, noise: float,
              time_split: Sequence[float]) -> np.ndarray:
    """Time-division rates ``tau_k log2(1 + P g_k / sigma^2)``."""
    gains = np.asarray(gains, dtype=float)
    tau = np.asarray(time_split, dtype=float)
    if tau.shape != gains.shape:
        raise ValueError("one time fraction per user is required")
    if np.any(tau < 0) or not np.isclose(tau.sum(), 1.0):
        raise ValueError(f"time split must be nonnegative and sum to 1, got {tau.tolist()}")
    return tau * np.log2(1.0 + power * gains / noise)


def split_grid(n: int = GRID_POINTS) -> np.ndarray:
    """``n`` interior points of (0, 1), shared by the NOMA and OMA searches."""
    return np.linspace(0.0, 1.0, n + 2)[1:-1]


def _grid_then_golden(f, grid):
    vals = np.array([f(x) for x in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_section_max(f, lo, hi)
    if fx < vals[i]:
        return float(grid[i]), float(vals[i])
    return float(x), float(fx)


def optimize_noma(gains: Sequence[float], power: float, noise: float,
                  n_grid: int = GRID_POINTS, pair: NomaPair = NomaPair()):
    """Sum-rate-maximising power split; returns ``(alpha, sum_rate)``."""
    _check_gains(gains)

    def f(a):
        return sum(noma_rates(NomaPair(pair.transmit_user, pair.reflect_user, a),
                              gains, power, noise))

    return _grid_then_golden(f, split_grid(n_grid))


def optimize_oma(gains: Sequence[float], power: float, noise: float,
                 n_grid: int = GRID_POINTS):
    """Sum-rate-maximising time split ``tau`` for the stronger user.

    Returns ``(tau, sum_rate)``; the stronger user gets ``tau`` of the time.
    """
    gains = _check_gains(gains)
    s, w = sic_order(gains)

    def f(t):
        split = np.empty(2)
        split[s], split[w] = t, 1.0 - t
        return float(np.sum(oma_rates(gains, power, noise, split)))

    return _grid_then_golden(f, split_grid(n_grid))
