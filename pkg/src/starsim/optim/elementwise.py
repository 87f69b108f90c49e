"""Element-wise coordinate descent for two-user SISO power minimisation.

With one base-station antenna and one user on each side, the power needed
to reach SINR targets ``gamma_t`` and ``gamma_r`` with a common transmit
signal is ``max(gamma_t sigma^2 / |h_t|^2, gamma_r sigma^2 / |h_r|^2)``.
Each element update holds the others fixed, so the effective gains are
affine in that element's coefficients and every candidate costs O(1):
a full sweep is linear in the number of elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import Side
from ..core import PhaseShiftModel, ProtocolKind, TrCoefficients
from ..errors import ScenarioMismatch
from .problem import BeamformingProblem, Objective, Solution, TraceEntry

__all__ = ["element_wise_optimize", "ElementWiseState", "element_sweep"]

_HALF_PI = np.pi / 2


@dataclass
class ElementWiseState:
    """Mutable solver state; ``a_t``/``a_r`` are the current effective gains."""

    x_t: np.ndarray   # h_t[m] * g[m], transmission-side cascade per element
    x_r: np.ndarray
    gamma: np.ndarray  # targets scaled by noise power: (gamma_t sigma^2, gamma_r sigma^2)
    theta: np.ndarray
    phi_t: np.ndarray
    nu: np.ndarray
    a_t: complex
    a_r: complex
    n_phase: int = 64
    n_theta: int = 64
    zoom_levels: int = 4

    def c_t(self, m=slice(None)):
        return np.sin(self.theta[m]) * np.exp(1j * self.phi_t[m])

    def c_r(self, m=slice(None)):
        phi_r = self.phi_t[m] + _HALF_PI + np.pi * self.nu[m]
        return np.cos(self.theta[m]) * np.exp(1j * phi_r)

    def power(self, a_t=None, a_r=None):
        a_t = self.a_t if a_t is None else a_t
        a_r = self.a_r if a_r is None else a_r
        with np.errstate(divide="ignore"):
            return np.maximum(self.gamma[0] / np.abs(a_t) ** 2, self.gamma[1] / np.abs(a_r) ** 2)

    def coeffs(self) -> TrCoefficients:
        phi_r = self.phi_t + _HALF_PI + np.pi * self.nu
        return TrCoefficients.from_split_angle(self.theta, self.phi_t, phi_r)


def _candidates(state: ElementWiseState, b_t, b_r, m, nu, theta, phi):
    """Required power on a (theta, phi) grid for one element and bit ``nu``."""
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    a_t = b_t + state.x_t[m] * np.sin(th) * np.exp(1j * ph)
    a_r = b_r + state.x_r[m] * np.cos(th) * np.exp(1j * (ph + _HALF_PI + np.pi * nu))
    return state.power(a_t, a_r), th, ph


def update_element(state: ElementWiseState, m: int) -> bool:
    """Best setting of element ``m`` given the rest; applied only if strictly better."""
    b_t = state.a_t - state.x_t[m] * state.c_t(m)
    b_r = state.a_r - state.x_r[m] * state.c_r(m)
    current = state.power()
    best = (current, state.theta[m], state.phi_t[m], state.nu[m])
    theta0 = np.linspace(0.0, _HALF_PI, state.n_theta)
    phi0 = np.linspace(0.0, 2 * np.pi, state.n_phase, endpoint=False)
    d_theta = theta0[1] - theta0[0]
    d_phi = phi0[1] - phi0[0]
    for nu in (0, 1):
        p, th, ph = _candidates(state, b_t, b_r, m, nu, theta0, phi0)
        i = np.unravel_index(np.argmin(p), p.shape)
        bt, bp, bv = th[i], ph[i], p[i]
        span_t, span_p = d_theta, d_phi
        # fixed-cost zoom around the grid optimum
        for _ in range(state.zoom_levels):
            theta = np.clip(np.linspace(bt - span_t, bt + span_t, 9), 0.0, _HALF_PI)
            phi = np.linspace(bp - span_p, bp + span_p, 9)
            p, th, ph = _candidates(state, b_t, b_r, m, nu, theta, phi)
            i = np.unravel_index(np.argmin(p), p.shape)
            if p[i] < bv:
                bt, bp, bv = th[i], ph[i], p[i]
            span_t /= 4.0
            span_p /= 4.0
        if bv < best[0]:
            best = (bv, bt, bp, nu)
    if not best[0] < current:
        return False
    _, state.theta[m], state.phi_t[m], state.nu[m] = best
    state.a_t = b_t + state.x_t[m] * state.c_t(m)
    state.a_r = b_r + state.x_r[m] * state.c_r(m)
    return True


def element_sweep(state: ElementWiseState, trace=None, sweep: int = 0) -> float:
    """One cyclic pass over all elements; returns the power after the pass."""
    for m in range(state.theta.shape[0]):
        update_element(state, m)
        if trace is not None:
            trace.append(TraceEntry(sweep, m, float(state.power()), 0.0, "element"))
    return float(state.power())


def initial_state(prob: BeamformingProblem, seed: int = 0, n_phase: int = 64) -> ElementWiseState:
    """Validate the problem shape and build a random feasible starting point."""
    ch = prob.channel
    if prob.objective is not Objective.TRANSMIT_POWER:
        raise ScenarioMismatch("element-wise solver minimises transmit power")
    if ch.n_antennas != 1:
        raise ScenarioMismatch(f"element-wise solver needs one BS antenna, got {ch.n_antennas}")
    if ch.n_users != 2 or set(ch.sides) != {Side.TRANSMISSION, Side.REFLECTION}:
        raise ScenarioMismatch("element-wise solver needs one user on each side")
    if prob.model is not PhaseShiftModel.COUPLED:
        raise ScenarioMismatch("element-wise solver is defined for the coupled model")
    if prob.protocol.kind is not ProtocolKind.ENERGY_SPLITTING:
        raise ScenarioMismatch("element-wise solver supports energy splitting only")
    kt, kr = ch.user_on(Side.TRANSMISSION), ch.user_on(Side.REFLECTION)
    g = ch.g[:, 0]
    targets = np.asarray(prob.sinr_targets)
    rng = np.random.default_rng(seed)
    m = ch.m
    state = ElementWiseState(
        x_t=ch.h[kt] * g, x_r=ch.h[kr] * g,
        gamma=np.array([targets[kt], targets[kr]]) * prob.noise_power,
        theta=np.full(m, np.pi / 4), phi_t=rng.uniform(0.0, 2 * np.pi, m),
        nu=rng.integers(0, 2, m), a_t=0j, a_r=0j, n_phase=n_phase)
    state.a_t = ch.d[kt, 0] + np.sum(state.x_t * state.c_t())
    state.a_r = ch.d[kr, 0] + np.sum(state.x_r * state.c_r())
    return state


def element_wise_optimize(prob: BeamformingProblem, seed: int = 0, n_phase: int = 64,
                          inner_tol: float = 1e-5, max_sweeps: int = 100) -> Solution:
    """Minimise the two-user SISO transmit power one element at a time.

    Parameters
    ----------
    prob : BeamformingProblem
        Transmit-power problem with one BS antenna, one user per side and
        the coupled model.
    seed : int
        Seeds the random initial phases and auxiliary bits.
    n_phase : int
        Points in the coarse phase grid of each element update.
    inner_tol : float
        Stop once a sweep lowers the power by less than this fraction.
    max_sweeps : int

    Returns
    -------
    Solution
        ``precoders`` is the ``(1, 1)`` common transmit amplitude; the trace
        has one row per element update (``outer`` = sweep, ``inner`` =
        element), so its objective column never increases.

    Raises
    ------
    ScenarioMismatch
        If the problem does not have the required shape.
    """
    state = initial_state(prob, seed, n_phase)
    trace = [TraceEntry(0, -1, float(state.power()), 0.0, "init")]
    prev = float(state.power())
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps += 1
        cur = element_sweep(state, trace, sweep)
        if prev - cur < inner_tol * prev:
            break
        prev = cur
    power = float(state.power())
    trace.append(TraceEntry(sweeps - 1, len(trace), power, 0.0, "final"))
    w = np.array([[np.sqrt(power)]], dtype=complex)
    return Solution(w, state.coeffs(), power, trace, sweeps)
