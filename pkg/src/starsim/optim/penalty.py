"""Penalty-based beamforming under the coupled phase-shift model.

The coupled constraint is moved into the objective as
``rho * sum_m min(|e^{j(phi_r - phi_t)} - j|^2, |e^{j(phi_r - phi_t)} + j|^2)``.
Each outer iteration solves the penalised problem by block ascent
(precoder block, then a projected-gradient step on the T&R coefficients)
and multiplies ``rho`` by ``growth`` until the phase violation falls
below ``violation_tol``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .._search import golden_section_max
from ..core import (PhaseShiftModel, ProtocolKind, TimeSwitchedCoefficients,
                    phase_violation, project_coupled, round_to_modes)
from ..errors import ScenarioMismatch
from ._common import Point, Scaled, ascent_step, random_point
from .precoding import wmmse_round
from .problem import (BeamformingProblem, Objective, PenaltyConfig, Solution,
                      TraceEntry)

__all__ = ["penalty_optimize"]


def _converged(new, old, tol):
    return abs(new - old) <= tol * max(1.0, abs(old))


def _start(sc: Scaled, prob: BeamformingProblem, rng, init: Optional[Solution]):
    if init is None:
        x = random_point(prob.m, prob.model, rng)
        return x, sc.initial_precoders(x)
    x = Point.from_coeffs(init.coeffs)
    w = np.asarray(init.precoders, dtype=complex)
    if sc.maximize_se and w.shape != (prob.n_bs_antennas, prob.n_users):
        w = sc.initial_precoders(x)
    return x, w


def _feasible_candidate(sc: Scaled, x: Point, w, coupled: bool):
    coeffs = x.coeffs()
    if coupled:
        coeffs = project_coupled(coeffs)
    xp = Point.from_coeffs(coeffs)
    value, w = sc.refit(xp, w)
    return value, coeffs, w


def _solve(sc: Scaled, cfg: PenaltyConfig, x: Point, w, coupled: bool,
           frozen_theta=False, outer_offset=0):
    """Penalty loop; returns the best projected iterate and the trace."""
    trace = []
    best = _feasible_candidate(sc, x, w, coupled)
    rho = cfg.rho0 if coupled else 0.0
    n_outer = cfg.max_outer if coupled else 1
    t = 1.0
    iterations = 0
    outer = 0
    for outer in range(n_outer):
        prev = None
        for inner in range(cfg.max_inner):
            if sc.maximize_se:
                w = wmmse_round(sc.rows(x), w, sc.prob.power_budget, sc.weights)
            x, w, value, step = ascent_step(sc, x, w, rho, min(2.0 * t, 1e3),
                                            frozen_theta, coupled)
            t = step if step else t
            iterations += 1
            f, _ = sc.value(x, w)
            trace.append(TraceEntry(outer + outer_offset, inner, sc.report(f),
                                    phase_violation(x.coeffs()), "inner"))
            if step == 0.0 or (prev is not None and _converged(value, prev, cfg.inner_tol)):
                break
            prev = value
        cand = _feasible_candidate(sc, x, w, coupled)
        if cand[0] > best[0]:
            best = cand
        if phase_violation(x.coeffs()) < cfg.violation_tol:
            break
        rho *= cfg.growth
    if coupled:
        cand, steps = _polish(sc, cfg, best[1], best[2], frozen_theta)
        last = outer + outer_offset
        for inner, v, viol in steps:
            trace.append(TraceEntry(last, inner, sc.report(v), viol, "polish"))
        iterations += len(steps)
        if cand[0] > best[0]:
            best = cand
    value, coeffs, w = best
    return value, coeffs, w, trace, iterations, outer + outer_offset


def _polish(sc: Scaled, cfg: PenaltyConfig, coeffs, w, frozen_theta=False):
    """Ascent restricted to the exactly coupled set (the infinite-penalty limit)."""
    x = Point.from_coeffs(coeffs)
    trace = []
    t = 1.0
    prev = None
    for inner in range(cfg.max_inner):
        if sc.maximize_se:
            w = wmmse_round(sc.rows(x), w, sc.prob.power_budget, sc.weights)
        x, w, value, step = ascent_step(sc, x, w, 0.0, min(2.0 * t, 1e3), frozen_theta,
                                        coupled=True, tied=True)
        t = step if step else t
        trace.append((inner, value, phase_violation(x.coeffs())))
        if step == 0.0 or (prev is not None and _converged(value, prev, cfg.inner_tol)):
            break
        prev = value
    return _feasible_candidate(sc, x, w, True), trace


def _finish(sc, value, coeffs, w, trace, iterations, last_outer):
    objective = sc.report(value)
    trace.append(TraceEntry(last_outer, len(trace), objective, phase_violation(coeffs), "final"))
    return Solution(w, coeffs, objective, trace, iterations)


def penalty_optimize(prob: BeamformingProblem, cfg: PenaltyConfig = PenaltyConfig(),
                     seed: int = 0, init: Optional[Solution] = None) -> Solution:
    """Jointly optimise precoders and T&R coefficients with a growing penalty.

    Parameters
    ----------
    prob : BeamformingProblem
    cfg : PenaltyConfig
        Penalty schedule and inner-loop limits.
    seed : int
        Seeds the random initial point (ignored when ``init`` is given).
    init : Solution, optional
        Warm start. The start point itself (after projection and a precoder
        refit) is a candidate, so the result is never worse than it.

    Returns
    -------
    Solution
        The best iterate after exact projection onto the coupled
        constraint and a precoder refit. Under the independent model the
        penalty is inactive and a single outer iteration runs.

    Mode switching rounds the energy-splitting solution to single-mode
    elements and re-optimises the phases; time switching solves one
    transmission-only and one reflection-only slot and picks the slot
    fractions by golden-section search.
    """
    rng = np.random.default_rng(seed)
    sc = Scaled(prob)
    coupled = prob.model is PhaseShiftModel.COUPLED
    kind = prob.protocol.kind

    if kind is ProtocolKind.TIME_SWITCHING:
        return _time_switching(sc, prob, cfg, rng)

    x, w = _start(sc, prob, rng, init)
    value, coeffs, w, trace, its, last = _solve(sc, cfg, x, w, coupled)
    if kind is ProtocolKind.MODE_SWITCHING:
        rounded = round_to_modes(coeffs)
        x = Point.from_coeffs(rounded)
        value, coeffs, w, more, its2, last = _solve(
            sc, cfg, x, w, coupled, frozen_theta=True, outer_offset=last + 1)
        trace += more
        its += its2
    return _finish(sc, value, coeffs, w, trace, its, last)


def _time_switching(sc: Scaled, prob: BeamformingProblem, cfg: PenaltyConfig, rng) -> Solution:
    if prob.objective is not Objective.SUM_SPECTRAL_EFFICIENCY:
        raise ScenarioMismatch("time switching is only supported for sum-SE maximisation")
    slots = []
    trace = []
    iterations = 0
    offset = 0
    for theta in (np.pi / 2, 0.0):
        x = random_point(prob.m, PhaseShiftModel.INDEPENDENT, rng)
        x = Point(np.full(prob.m, theta), x.phi_t, x.phi_r)
        w = sc.initial_precoders(x)
        value, coeffs, w, more, its, last = _solve(sc, cfg, x, w, False, frozen_theta=True,
                                                    outer_offset=offset)
        if prob.model is PhaseShiftModel.COUPLED:
            coeffs = project_coupled(coeffs)
        slots.append((value, coeffs, w))
        trace += more
        iterations += its
        offset = last + 1
    se_t, se_r = slots[0][0], slots[1][0]
    lam_t, value = golden_section_max(lambda lt: lt * se_t + (1.0 - lt) * se_r, 0.0, 1.0)
    coeffs = TimeSwitchedCoefficients(slots[0][1], slots[1][1], (lam_t, 1.0 - lam_t))
    w = np.stack([slots[0][2], slots[1][2]])
    trace.append(TraceEntry(offset - 1, len(trace), value, 0.0, "final"))
    return Solution(w, coeffs, value, trace, iterations, slot_values=(se_t, se_r))
