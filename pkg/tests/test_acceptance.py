"""Acceptance gate.

Each criterion prints one ``[PASS]``/``[FAIL]`` line (also repeated in the
terminal summary) and then asserts.
"""

import copy
import json
import time

import numpy as np
import pytest

from conftest import se_problem
from starsim.channel import (ChannelRealization, Deployment, FadingParams, LinkGeometry,
                             far_field_links, rayleigh_distance, wavelength)
from starsim.cli import main
from starsim.config import default_config, to_dict
from starsim.core import (ETA0, ImpedancePair, PhaseShiftModel, ProtocolKind, SurfaceConfig,
                          TrMatrix, classify, coeffs_from_impedance)
from starsim.optim import (BeamformingProblem, Objective, alternating_optimize,
                           element_wise_optimize, penalty_optimize)
from starsim.optim.elementwise import element_sweep, initial_state
from starsim.scenarios import (build_problem, compare_protocols, default_scenario,
                               optimize_noma, optimize_oma)

RESULTS = []
SEEDS = range(20)


def report(number, name, ok, detail, elapsed=None):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name}: {detail}"
    if elapsed is not None:
        line += f" ({elapsed:.1f} s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _near_square(m):
    c = int(np.sqrt(m))
    while m % c:
        c -= 1
    return max(c, m // c)


def _power_problem(seed, m):
    lam = default_scenario().wavelength
    surf = SurfaceConfig.planar(m, _near_square(m), lam / 2)
    return build_problem(default_scenario(surface=surf, n_bs_antennas=1, seed=seed), 0,
                         Objective.TRANSMIT_POWER)


# -- 1 ---------------------------------------------------------------------------------------

def test_criterion_01_rayleigh_distance():
    d = rayleigh_distance(0.5, wavelength(60e9))
    report(1, "Rayleigh distance of a 0.5 m surface at 60 GHz", abs(d - 100.0) <= 0.5,
           f"{d:.3f} m")


# -- 2 ---------------------------------------------------------------------------------------

def test_criterion_02_impedance_gives_coupled_lossless_phases():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_energy = worst_phase = 0.0
    for _ in range(1000):
        y = 1j * rng.standard_normal() * 3 / ETA0
        z = 1j * rng.standard_normal() * 3 * ETA0
        t, r = coeffs_from_impedance(ImpedancePair(y, z, ETA0))
        worst_energy = max(worst_energy, abs(abs(t) ** 2 + abs(r) ** 2 - 1))
        diff = np.angle(r * np.conj(t)) % (2 * np.pi)
        worst_phase = max(worst_phase, min(abs(diff - np.pi / 2), abs(diff - 3 * np.pi / 2)))
    elapsed = time.perf_counter() - start
    ok = worst_energy <= 1e-9 and worst_phase <= 1e-9 and elapsed < 1.0
    report(2, "impedance pairs are lossless with quadrature phases", ok,
           f"max energy error {worst_energy:.1e}, max phase error {worst_phase:.1e} rad",
           elapsed)


# -- 3 and 4 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def penalty_runs():
    start = time.perf_counter()
    sols = [penalty_optimize(se_problem(s), seed=s) for s in SEEDS]
    return sols, time.perf_counter() - start


def _per_outer_violation(sol):
    last = {}
    for e in sol.trace:
        if e.stage == "inner":
            last[e.outer] = e.max_violation
    return [last[k] for k in sorted(last)]


def _coupled_distance(coeffs):
    diff = (coeffs.phi_r - coeffs.phi_t) % (2 * np.pi)
    return np.minimum(np.abs(diff - np.pi / 2), np.abs(diff - 3 * np.pi / 2))


def test_criterion_03_penalty_converges_to_coupled_phases(penalty_runs):
    sols, elapsed = penalty_runs
    good = 0
    monotone = 0
    for sol in sols:
        v = _per_outer_violation(sol)
        monotone += all(b <= a for a, b in zip(v, v[1:]))
        active = (sol.coeffs.beta_t > 1e-12) & (sol.coeffs.beta_r > 1e-12)
        # both the last penalty iterate and the returned solution must be coupled
        good += v[-1] < 1e-3 and np.all(_coupled_distance(sol.coeffs)[active] < 1e-3)
    ok = good >= 0.95 * len(sols) and monotone == len(sols) and elapsed < 60
    report(3, "penalty iterates reach the coupled phase set", ok,
           f"{good}/{len(sols)} coupled within 1e-3 rad, "
           f"{monotone}/{len(sols)} with non-increasing violation", elapsed)


def test_criterion_04_phase_model_ordering(penalty_runs):
    sols, elapsed = penalty_runs
    start = time.perf_counter()
    penalty = np.mean([s.objective_value for s in sols])
    ao = np.mean([alternating_optimize(se_problem(s), seed=s).objective_value for s in SEEDS])
    ind = np.mean([penalty_optimize(se_problem(s, PhaseShiftModel.INDEPENDENT), seed=s)
                   .objective_value for s in SEEDS])
    elapsed += time.perf_counter() - start
    ratio = penalty / ind
    ok = ind >= penalty >= ao and ratio >= 0.9 and elapsed < 120
    report(4, "mean SE independent >= penalty >= alternating", ok,
           f"{ind:.3f} >= {penalty:.3f} >= {ao:.3f} bit/s/Hz, penalty/independent {ratio:.3f}",
           elapsed)


# -- 5 ---------------------------------------------------------------------------------------

def test_criterion_05_protocol_ordering():
    start = time.perf_counter()
    worst_ms = worst_ts = np.inf
    for s in SEEDS:
        out = compare_protocols(se_problem(s), seed=s)
        es = out[ProtocolKind.ENERGY_SPLITTING].objective_value
        worst_ms = min(worst_ms, es - out[ProtocolKind.MODE_SWITCHING].objective_value)
        worst_ts = min(worst_ts, es - out[ProtocolKind.TIME_SWITCHING].objective_value)
    elapsed = time.perf_counter() - start
    ok = worst_ms >= -1e-9 and worst_ts >= -1e-9 and elapsed < 120
    report(5, "energy splitting dominates mode and time switching", ok,
           f"min ES-MS {worst_ms:.3g}, min ES-TS {worst_ts:.3g} bit/s/Hz", elapsed)


# -- 6 ---------------------------------------------------------------------------------------

def _symmetric_single_element():
    ch = ChannelRealization([[1e-3]], [[1e-3], [1e-3j]], [[0.0], [0.0]],
                            ("transmission", "reflection"))
    return BeamformingProblem(Objective.TRANSMIT_POWER, ch, 1e-12, sinr_targets=[2.0, 2.0])


def _grid_power(prob, n=2001):
    """Exhaustive (beta, phase, branch) grid on the coupled set."""
    ch = prob.channel
    beta = np.linspace(0, 1, n)[:, None]
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)[None, :]
    best = np.inf
    for branch in (np.pi / 2, 3 * np.pi / 2):
        at = ch.h[0, 0] * np.sqrt(beta) * np.exp(1j * phi) * ch.g[0, 0]
        ar = ch.h[1, 0] * np.sqrt(1 - beta) * np.exp(1j * (phi + branch)) * ch.g[0, 0]
        with np.errstate(divide="ignore"):
            p = np.maximum(prob.sinr_targets[0] * prob.noise_power / np.abs(at) ** 2,
                           prob.sinr_targets[1] * prob.noise_power / np.abs(ar) ** 2)
        best = min(best, float(p.min()))
    return best


def test_criterion_06_element_wise_solver():
    start = time.perf_counter()
    increases = 0
    for s in SEEDS:
        objs = [e.objective for e in element_wise_optimize(_power_problem(s, 16), seed=s).trace]
        increases += sum(b > a for a, b in zip(objs, objs[1:]))
    prob = _symmetric_single_element()
    gap_db = 10 * np.log10(element_wise_optimize(prob).objective_value / _grid_power(prob))
    ms = np.array([8, 16, 32, 64])
    med = []
    for m in ms:
        state = initial_state(_power_problem(0, int(m)), seed=0)
        times = []
        for _ in range(7):
            s = copy.deepcopy(state)
            t0 = time.perf_counter()
            element_sweep(s)
            times.append(time.perf_counter() - t0)
        med.append(np.median(times))
    med = np.array(med)
    fit = np.polyval(np.polyfit(ms, med, 1), ms)
    r2 = 1 - np.sum((med - fit) ** 2) / np.sum((med - med.mean()) ** 2)
    elapsed = time.perf_counter() - start
    ok = increases == 0 and abs(gap_db) <= 0.1 and r2 > 0.95 and elapsed < 60
    report(6, "element-wise solver is monotone, near-optimal and linear in M", ok,
           f"(a) {increases} increases, (b) {gap_db:+.4f} dB from grid, (c) R^2 {r2:.4f}",
           elapsed)


# -- 7 ---------------------------------------------------------------------------------------

def test_criterion_07_far_field_distance_law():
    start = time.perf_counter()
    lam = wavelength(3.5e9)
    surf = SurfaceConfig.planar(1, 1, lam / 2)
    fading = FadingParams(lam)
    d1 = np.geomspace(5.0, 80.0, 5)
    power = []
    for d in d1:
        dep = Deployment(surf, [LinkGeometry((-d, 0.0, 0.0), (10.0, 0.0, 0.0), "transmission")])
        samples = []
        for s in range(10_000):
            ch = far_field_links(dep, fading, s)
            samples.append(abs(ch.h[0, 0] * ch.g[0, 0]) ** 2)
        power.append(np.mean(samples))
    slope = np.polyfit(np.log(d1), np.log(power), 1)[0]
    elapsed = time.perf_counter() - start
    report(7, "cascaded power falls with the square of the BS distance",
           abs(slope + 2) <= 0.05 and elapsed < 30, f"slope {slope:.4f}", elapsed)


# -- 8 ---------------------------------------------------------------------------------------

def _eig_class(xi, tol=1e-9):
    ev = np.linalg.eigvals(xi.conj().T @ xi - np.eye(2)).real
    if np.all(np.abs(ev) <= tol):
        return "passive_lossless"
    if np.all(ev < -tol):
        return "passive_lossy"
    if np.all(ev > tol):
        return "active"
    return "indefinite"


def test_criterion_08_classification():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    agree = 0
    n = 10_000
    for i in range(n):
        kind = i % 4
        if kind == 0:  # unitary, scaled to hit every class
            q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            xi = q * rng.choice([0.5, 1.0, 1.5])
        else:
            scale = (0.2, 0.6, 1.2)[kind - 1]
            xi = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) * scale
        agree += classify(TrMatrix(xi)).value == _eig_class(xi)
    elapsed = time.perf_counter() - start
    report(8, "classification matches eigenvalue brute force", agree == n and elapsed < 5,
           f"{agree}/{n} agree", elapsed)


# -- 9 ---------------------------------------------------------------------------------------

def test_criterion_09_noma_dominates_oma():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    wins = 0
    margins = []
    for _ in range(20):
        strong = 10 ** rng.uniform(-9, -6)
        weak = strong * 10 ** (-rng.uniform(1.0, 3.0))  # 10 to 30 dB below
        gains = [strong, weak] if rng.random() < 0.5 else [weak, strong]
        _, noma = optimize_noma(gains, 1.0, 1e-11)
        _, oma = optimize_oma(gains, 1.0, 1e-11)
        wins += noma >= oma
        margins.append(noma - oma)
    elapsed = time.perf_counter() - start
    report(9, "NOMA sum rate is at least OMA on asymmetric pairs", wins == 20 and elapsed < 10,
           f"{wins}/20, min margin {min(margins):.3f} bit/s/Hz", elapsed)


# -- 10 --------------------------------------------------------------------------------------

def test_criterion_10_cli_determinism(tmp_path):
    start = time.perf_counter()
    raw = to_dict(default_config())
    raw["trials"] = 4
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [main(["-q", "run", str(path), "--out-dir", str(o), "--no-timestamp"]) for o in outs]
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("summary.json", "trials.csv"))
    elapsed = time.perf_counter() - start
    report(10, "repeated runs give byte-identical outputs", codes == [0, 0] and same,
           f"exit codes {codes}, identical={same}", elapsed)
