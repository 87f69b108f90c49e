"""Shared machinery for the gradient-based solvers.

Coefficients are parameterised as ``beta_t = sin^2(theta)``,
``beta_r = cos^2(theta)`` with ``theta`` in ``[0, pi/2]``, which keeps every
iterate passive lossless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PhaseShiftModel, TrCoefficients
from ..errors import InfeasibleTargets
from .precoding import min_power_precoders, mrt, wmmse
from .problem import BeamformingProblem, Objective

_LN2 = np.log(2.0)
_HALF_PI = np.pi / 2

ARMIJO = 1e-4
SHRINK = 0.5
MAX_BACKTRACK = 40


@dataclass(frozen=True)
class Point:
    theta: np.ndarray
    phi_t: np.ndarray
    phi_r: np.ndarray

    def coeffs(self) -> TrCoefficients:
        return TrCoefficients.from_split_angle(self.theta, self.phi_t, self.phi_r)

    @classmethod
    def from_coeffs(cls, c: TrCoefficients) -> "Point":
        return cls(np.array(c.split_angle, dtype=float), np.array(c.phi_t, dtype=float),
                   np.array(c.phi_r, dtype=float))

    def step(self, d_theta, d_phi_t, d_phi_r, t) -> "Point":
        theta = np.clip(self.theta + t * d_theta, 0.0, _HALF_PI)
        return Point(theta, self.phi_t + t * d_phi_t, self.phi_r + t * d_phi_r)


def random_point(m: int, model: PhaseShiftModel, rng: np.random.Generator) -> Point:
    """Even amplitude split with random phases (feasible pairs when coupled)."""
    phi_t = rng.uniform(0.0, 2 * np.pi, m)
    if model is PhaseShiftModel.COUPLED:
        nu = rng.integers(0, 2, m)
        phi_r = phi_t + np.pi / 2 + nu * np.pi
    else:
        phi_r = rng.uniform(0.0, 2 * np.pi, m)
    return Point(np.full(m, np.pi / 4), phi_t, phi_r)


class Scaled:
    """Noise-normalised view of a problem's channels."""

    def __init__(self, prob: BeamformingProblem):
        ch = prob.channel
        s = 1.0 / np.sqrt(prob.noise_power)
        self.prob = prob
        self.g = ch.g
        self.h = ch.h * s
        self.d = ch.d * s
        self.mask = ch.side_mask()
        self.weights = np.asarray(prob.weights, dtype=float)
        self.maximize_se = prob.objective is Objective.SUM_SPECTRAL_EFFICIENCY

    def side_coeffs(self, x: Point):
        c_t = np.sin(x.theta) * np.exp(1j * x.phi_t)
        c_r = np.cos(x.theta) * np.exp(1j * x.phi_r)
        return c_t, c_r

    def rows(self, x: Point) -> np.ndarray:
        c_t, c_r = self.side_coeffs(x)
        c = np.where(self.mask[:, None], c_t[None, :], c_r[None, :])
        return self.d + (self.h * c) @ self.g

    # -- objective ----------------------------------------------------------
    def se(self, a, w) -> float:
        u2 = np.abs(a @ w) ** 2
        sig = np.diag(u2)
        tot = u2.sum(axis=1) + 1.0
        return float(np.sum(self.weights * np.log2(tot / (tot - sig))))

    def min_power(self, a):
        return min_power_precoders(a, self.prob.sinr_targets, self.prob.power_cap)

    def value(self, x: Point, w=None):
        """Internal objective to maximise and the precoders it was evaluated with.

        Sum SE uses the given precoders; transmit power re-solves the exact
        minimum-power precoders and returns ``-10 log10(P)``.
        """
        a = self.rows(x)
        if self.maximize_se:
            return self.se(a, w), w
        w, _ = self.min_power(a)
        return -10.0 * np.log10(np.sum(np.abs(w) ** 2)), w

    def report(self, internal: float) -> float:
        """Problem-level objective (bit/s/Hz or W) from the internal value."""
        return internal if self.maximize_se else 10.0 ** (-internal / 10.0)

    def refit(self, x: Point, w):
        a = self.rows(x)
        if self.maximize_se:
            if w is None or not np.any(w):
                w = mrt(a, self.prob.power_budget)
            w = wmmse(a, w, self.prob.power_budget, self.weights)
            return self.se(a, w), w
        w, _ = self.min_power(a)
        return -10.0 * np.log10(np.sum(np.abs(w) ** 2)), w

    def initial_precoders(self, x: Point):
        if self.maximize_se:
            return mrt(self.rows(x), self.prob.power_budget)
        return self.min_power(self.rows(x))[0]

    # -- gradient -----------------------------------------------------------
    def weight_matrix(self, a, w):
        """``Omega`` with ``dF = sum_ki Omega_ki d|a_k w_i|^2``."""
        u2 = np.abs(a @ w) ** 2
        k = u2.shape[0]
        if self.maximize_se:
            tot = u2.sum(axis=1) + 1.0
            interf = tot - np.diag(u2)
            off = 1.0 - np.eye(k)
            return (self.weights / _LN2)[:, None] * (1.0 / tot[:, None] - off / interf[:, None])
        _, dual = self.min_power(a)
        targets = np.asarray(self.prob.sinr_targets)
        omega = np.tile(dual[:, None], (1, k))
        np.fill_diagonal(omega, -dual / targets)
        power = np.sum(np.abs(w) ** 2)
        return -10.0 / (np.log(10.0) * power) * omega

    def complex_gradient(self, x: Point, w):
        """``(g_t, g_r)`` with ``dF = Re(g_t . dc_t + g_r . dc_r)``."""
        a = self.rows(x)
        u = a @ w
        b = self.g @ w
        omega = self.weight_matrix(a, w)
        gam = 2.0 * self.h * ((omega * u.conj()) @ b.T)
        return gam[self.mask].sum(axis=0), gam[~self.mask].sum(axis=0)

    def gradient(self, x: Point, w):
        """Gradient of the internal objective in ``(theta, phi_t, phi_r)``."""
        g_t, g_r = self.complex_gradient(x, w)
        c_t, c_r = self.side_coeffs(x)
        d_theta = (np.real(g_t * np.cos(x.theta) * np.exp(1j * x.phi_t))
                   - np.real(g_r * np.sin(x.theta) * np.exp(1j * x.phi_r)))
        d_phi_t = -np.imag(g_t * c_t)
        d_phi_r = -np.imag(g_r * c_r)
        return d_theta, d_phi_t, d_phi_r


def _aim(g, options):
    """Option (per element) maximising ``Re(g e^{j phi})``."""
    scores = np.real(g[None, :] * np.exp(1j * options))
    return options[np.argmax(scores, axis=0), np.arange(g.shape[0])]


def reaim_dead_phases(sc: Scaled, x: Point, w, coupled: bool) -> Point:
    """Point the phase of every zero-amplitude side where growing it helps most.

    Such phases do not affect the objective, but the ``theta`` gradient at
    the boundary depends on them; a badly aimed dead phase pins the element
    to single-mode operation. Under the coupled model only the two phases
    admissible against the live side are considered, so the move never
    increases the coupling penalty.
    """
    dead_t = x.theta <= 0.0
    dead_r = x.theta >= _HALF_PI
    if not (np.any(dead_t) or np.any(dead_r)):
        return x
    g_t, g_r = sc.complex_gradient(x, w)
    phi_t, phi_r = x.phi_t.copy(), x.phi_r.copy()
    if coupled:
        best_t = _aim(g_t, np.stack([phi_r - np.pi / 2, phi_r - 3 * np.pi / 2]))
        best_r = _aim(g_r, np.stack([phi_t + np.pi / 2, phi_t + 3 * np.pi / 2]))
    else:
        best_t, best_r = -np.angle(g_t), -np.angle(g_r)
    phi_t[dead_t] = best_t[dead_t]
    phi_r[dead_r] = best_r[dead_r]
    return Point(x.theta, phi_t, phi_r)


def coupling_penalty(x: Point) -> float:
    """Sum of squared chordal distances from ``e^{j(phi_r - phi_t)}`` to {j, -j}.

    Every element is penalised, including zero-amplitude ones: masking them
    would make the penalty jump when ``theta`` leaves the boundary.
    """
    s = np.abs(np.sin(x.phi_r - x.phi_t))
    return float(np.sum(2.0 - 2.0 * s))


def coupling_penalty_grad(x: Point):
    diff = x.phi_r - x.phi_t
    g = -2.0 * np.sign(np.sin(diff)) * np.cos(diff)
    return -g, g


def ascent_step(sc: Scaled, x: Point, w, rho: float, t0: float, frozen_theta=False,
                coupled=False, tied=False):
    """One projected-gradient step on ``F - rho * penalty`` with Armijo backtracking.

    With ``tied`` both phases of an element move by the same amount, so an
    exactly coupled point stays exactly coupled.

    Returns ``(x, w, value, t)``; ``t == 0`` when no improving step exists.
    ``value`` is the penalised internal objective at the returned point.
    """
    if not frozen_theta:
        x = reaim_dead_phases(sc, x, w, coupled)
    f0, w = sc.value(x, w)
    l0 = f0 - rho * coupling_penalty(x) if rho else f0
    d_th, d_pt, d_pr = sc.gradient(x, w)
    if rho:
        p_t, p_r = coupling_penalty_grad(x)
        d_pt = d_pt - rho * p_t
        d_pr = d_pr - rho * p_r
    if frozen_theta:
        d_th = np.zeros_like(d_th)
    if tied:
        d_pt = d_pr = d_pt + d_pr
    t = t0
    for _ in range(MAX_BACKTRACK):
        cand = x.step(d_th, d_pt, d_pr, t)
        try:
            f1, w1 = sc.value(cand, w)
        except InfeasibleTargets:
            t *= SHRINK
            continue
        l1 = f1 - rho * coupling_penalty(cand) if rho else f1
        moved = (np.dot(d_th, cand.theta - x.theta) + np.dot(d_pt, cand.phi_t - x.phi_t)
                 + np.dot(d_pr, cand.phi_r - x.phi_r))
        if l1 >= l0 + ARMIJO * moved and l1 > l0:
            return cand, w1, l1, t
        t *= SHRINK
    return x, w, l0, 0.0

