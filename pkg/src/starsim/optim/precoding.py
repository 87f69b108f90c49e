"""Transmit precoder blocks.

The helpers here work on noise-normalised channel rows ``a`` of shape
``(K, N)`` (unit noise power); precoders ``w`` have shape ``(N, K)`` and are
in sqrt-watts, so ``||w||_F^2`` is the transmit power.
"""

from __future__ import annotations

import numpy as np

from ..channel import effective_channels
from ..errors import InfeasibleTargets
from .problem import BeamformingProblem, Objective, spectral_efficiency

__all__ = ["mrt", "wmmse_round", "wmmse", "min_power_precoders", "precoder_update"]


def mrt(a: np.ndarray, budget: float) -> np.ndarray:
    """Maximum-ratio transmission to every user with equal power split."""
    norms = np.linalg.norm(a, axis=1)
    w = np.zeros(a.shape[::-1], dtype=complex)
    live = norms > 0
    if budget <= 0 or not np.any(live):
        return w
    w[:, live] = (a[live].conj() / norms[live, None]).T
    return w * np.sqrt(budget / live.sum())


def _power_at(lam, q2, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = q2 / (lam[:, None] + mu) ** 2
    return float(np.sum(np.where(q2 > 0, terms, 0.0)))


def wmmse_round(a: np.ndarray, w: np.ndarray, budget: float, weights=None) -> np.ndarray:
    """One weighted-MMSE block update (receivers, weights, precoders).

    The Lagrange multiplier of the power constraint is found by bisection
    on the eigen-decomposition of the weighted covariance, so the new
    precoders meet the budget with equality whenever it binds.
    """
    k, n = a.shape
    if budget <= 0:
        return np.zeros((n, k), dtype=complex)
    weights = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    u = a @ w
    total = np.sum(np.abs(u) ** 2, axis=1) + 1.0
    gain = np.diag(u)
    v = gain / total
    mse = 1.0 - np.abs(gain) ** 2 / total
    omega = weights / mse
    cov = a.conj().T @ ((omega * np.abs(v) ** 2)[:, None] * a)
    rhs = a.conj().T * (omega * v)[None, :]
    lam, vecs = np.linalg.eigh(cov)
    lam = np.clip(lam, 0.0, None)
    q = vecs.conj().T @ rhs
    q2 = np.abs(q) ** 2
    if not np.any(q2 > 0):
        return np.zeros((n, k), dtype=complex)
    scale = lam.max() if lam.max() > 0 else 1.0
    null = lam <= 1e-12 * scale
    if not np.any(null & (q2.sum(axis=1) > 1e-30 * q2.sum())) and _power_at(lam, q2, 0.0) <= budget:
        mu = 0.0
    else:
        lo, hi = 0.0, np.sqrt(q2.sum() / budget)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if _power_at(lam, q2, mid) > budget:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * hi:
                break
        mu = hi
    return vecs @ (q / (lam[:, None] + mu))


def wmmse(a, w, budget, weights=None, rounds=100, tol=1e-10):
    """Iterate :func:`wmmse_round` until the sum rate settles."""
    prev = spectral_efficiency(a, w, 1.0, weights)
    for _ in range(rounds):
        w = wmmse_round(a, w, budget, weights)
        cur = spectral_efficiency(a, w, 1.0, weights)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            break
        prev = cur
    return w


def min_power_precoders(a: np.ndarray, targets, cap: float = 1e6,
                        max_iter: int = 2000, tol: float = 1e-12):
    """Minimum-power precoders meeting SINR targets under unit noise.

    Uses the uplink-downlink duality fixed point for the dual (uplink)
    powers, MMSE beam directions, and a linear solve for the downlink powers.

    Returns
    -------
    w : ndarray, shape (N, K)
    dual : ndarray, shape (K,)
        Lagrange multipliers of the SINR constraints; their sum equals the
        minimum power.

    Raises
    ------
    InfeasibleTargets
        If the dual powers grow past ``cap`` or the downlink power system
        has no nonnegative solution.
    """
    k, n = a.shape
    targets = np.asarray(targets, dtype=float)
    norms2 = np.sum(np.abs(a) ** 2, axis=1)
    if np.any(norms2 <= 0):
        raise InfeasibleTargets("a user has an all-zero effective channel")
    if k == 1:
        p = targets[0] / norms2[0]
        if p > cap:
            raise InfeasibleTargets(f"required power {p:.3g} W exceeds cap {cap:.3g} W")
        return (a.conj().T / norms2[0]) * np.sqrt(targets[0]), np.array([p])

    eye = np.eye(n)
    outer = a.conj()[:, :, None] * a[:, None, :]
    lam = targets / norms2
    for _ in range(max_iter):
        cov = eye + np.tensordot(lam, outer, axes=1)
        sol = np.linalg.solve(cov, a.conj().T)
        quad = np.real(np.einsum("kn,nk->k", a, sol))
        new = 1.0 / ((1.0 + 1.0 / targets) * quad)
        if new.sum() > cap or not np.all(np.isfinite(new)):
            raise InfeasibleTargets(f"dual powers exceed cap {cap:.3g} W")
        done = np.max(np.abs(new - lam)) <= tol * new.sum()
        lam = new
        if done:
            break
    cov = eye + np.tensordot(lam, outer, axes=1)
    dirs = np.linalg.solve(cov, a.conj().T)
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    g = np.abs(a @ dirs) ** 2
    mat = -g.copy()
    np.fill_diagonal(mat, np.diag(g) / targets)
    try:
        p = np.linalg.solve(mat, np.ones(k))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleTargets("downlink power system is singular") from exc
    if np.any(p < 0) or p.sum() > cap:
        raise InfeasibleTargets("no nonnegative downlink power allocation within the cap")
    return dirs * np.sqrt(p)[None, :], lam


def precoder_update(prob: BeamformingProblem, coeffs, w=None) -> np.ndarray:
    """One precoder block for fixed T&R coefficients.

    Sum-SE problems get a weighted-MMSE round started from ``w`` (MRT when
    ``w`` is None); transmit-power problems get the exact minimum-power
    precoders.
    """
    a = effective_channels(prob.channel, coeffs) / np.sqrt(prob.noise_power)
    if prob.objective is Objective.TRANSMIT_POWER:
        return min_power_precoders(a, prob.sinr_targets, prob.power_cap)[0]
    if w is None:
        w = mrt(a, prob.power_budget)
    return wmmse_round(a, w, prob.power_budget, prob.weights)
