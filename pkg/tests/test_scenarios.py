import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starsim.channel import Side
from starsim.core import SurfaceConfig
from starsim.errors import DegenerateChannel, ScenarioMismatch
from starsim.optim import Objective
from starsim.scenarios import (NomaPair, SolverKind, SweepAxis, UserSpec, apply_axis,
                               build_problem, compare_phase_models, dbm_to_w, default_scenario,
                               noma_rates, oma_rates, optimize_noma, optimize_oma, run_noma,
                               run_power_min, run_se_max, run_sweep, sic_order, split_grid,
                               w_to_dbm, worker_count)


def small(**kw):
    lam = default_scenario().wavelength
    kw.setdefault("surface", SurfaceConfig.planar(8, 4, lam / 2))
    kw.setdefault("trials", 3)
    return default_scenario(**kw)


def siso(m=8, **kw):
    lam = default_scenario().wavelength
    cols = math.isqrt(m) if math.isqrt(m) ** 2 == m else m
    return default_scenario(surface=SurfaceConfig.planar(m, cols, lam / 2),
                            n_bs_antennas=1, trials=3, **kw)


# -- units and scenario ---------------------------------------------------------------

def test_dbm_conversions():
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert dbm_to_w(-80.0) == pytest.approx(1e-11)
    assert w_to_dbm(dbm_to_w(12.5)) == pytest.approx(12.5)
    assert w_to_dbm(0.0) == -math.inf


def test_default_scenario_shape():
    sc = default_scenario()
    assert sc.surface.m == 16 and sc.n_bs_antennas == 4 and sc.trials == 20
    sides = [u.side for u in sc.users]
    assert sides == [Side.TRANSMISSION, Side.REFLECTION]
    for u in sc.users:
        assert np.linalg.norm(np.asarray(u.position) - sc.surface.center) == pytest.approx(30.0, rel=1e-3)


def test_user_spec_validation():
    with pytest.raises(ValueError):
        UserSpec((1, 0, 0), Side.TRANSMISSION, sinr_target=-1.0)
    with pytest.raises(ValueError):
        UserSpec((1, 0, 0), Side.TRANSMISSION, weight=0.0)


def test_trial_seeds_are_consecutive():
    sc = small(seed=40)
    assert [sc.trial_seed(i) for i in range(3)] == [40, 41, 42]
    assert np.array_equal(sc.channel(2).g, replace(sc, seed=42).channel(0).g)


def test_power_objective_needs_targets():
    sc = small()
    sc = replace(sc, users=tuple(replace(u, sinr_target=None) for u in sc.users))
    with pytest.raises(ScenarioMismatch):
        build_problem(sc, 0, Objective.TRANSMIT_POWER)


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("STAR_SIM_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("STAR_SIM_THREADS", "3")
    assert worker_count() == 3 and worker_count(8) == 3 and worker_count(2) == 2
    monkeypatch.setenv("STAR_SIM_THREADS", "x")
    with pytest.raises(ValueError):
        worker_count()


# -- sum-SE runs ---------------------------------------------------------------------

def test_zero_budget_gives_zero_se():
    res = run_se_max(small(power_budget=0.0, trials=2))
    assert all(r.se == 0.0 for r in res.records)


def test_se_run_is_deterministic_and_reproducible_per_trial():
    sc = small()
    a = run_se_max(sc)
    b = run_se_max(sc)
    assert [r.se for r in a.records] == [r.se for r in b.records]
    single = run_se_max(replace(sc, seed=sc.seed + 2, trials=1))
    assert single.records[0].se == a.records[2].se
    assert single.records[0].seed == a.records[2].seed


def test_parallel_matches_serial():
    sc = small()
    serial = run_se_max(sc, workers=1)
    parallel = run_se_max(sc, workers=2)
    assert [r.se for r in serial.records] == [r.se for r in parallel.records]


def test_aggregate_uses_feasible_trials():
    res = run_se_max(small())
    agg = res.aggregate
    se = np.array([r.se for r in res.records])
    assert agg.n_trials == 3 and agg.feasibility_rate == 1.0
    assert agg.se_mean == pytest.approx(se.mean())
    assert agg.se_std == pytest.approx(se.std(ddof=1))
    assert agg.violation_max < 1e-4


def test_element_wise_rejected_for_se():
    with pytest.raises(ScenarioMismatch):
        run_se_max(small(), SolverKind.ELEMENT_WISE)


def test_compare_phase_models_orders_results():
    prob = build_problem(small(), 0, Objective.SUM_SPECTRAL_EFFICIENCY)
    coupled, independent = compare_phase_models(prob, seed=0)
    assert independent.objective_value >= coupled.objective_value - 1e-9
    assert coupled.max_violation < 1e-4


# -- power minimisation -------------------------------------------------------------------

def _scale_targets(sc, factor):
    return replace(sc, users=tuple(replace(u, sinr_target=u.sinr_target * factor)
                                   for u in sc.users))


def test_doubling_targets_doubles_power():
    sc = siso()
    base = run_power_min(sc)
    doubled = run_power_min(_scale_targets(sc, 2.0))
    for a, b in zip(base.records, doubled.records):
        assert b.power_w == pytest.approx(2 * a.power_w, rel=1e-9)


def test_more_elements_need_less_power():
    p16 = run_power_min(siso(16)).aggregate.power_w_mean
    p64 = run_power_min(siso(64)).aggregate.power_w_mean
    assert p64 < p16


def test_element_wise_needs_siso_pair():
    with pytest.raises(ScenarioMismatch):
        run_power_min(small())


def test_infeasible_trials_are_recorded():
    sc = _scale_targets(small(n_bs_antennas=1), 1e6)
    res = run_power_min(sc, SolverKind.PENALTY)
    assert res.aggregate.n_feasible == 0
    assert all(r.error.startswith("infeasible") for r in res.records)
    assert math.isnan(res.aggregate.se_mean)


# -- sweeps -----------------------------------------------------------------------------

def test_sweep_value_checks():
    with pytest.raises(ValueError):
        run_sweep(small(), SweepAxis.BUDGET, [])
    with pytest.raises(ValueError):
        run_sweep(small(), SweepAxis.BUDGET, [1.0, 0.5, 2.0])
    with pytest.raises(ValueError):
        run_sweep(small(), SweepAxis.BUDGET, [1.0], seed_policy="random")


def test_apply_axis():
    sc = small()
    assert apply_axis(sc, SweepAxis.ELEMENTS, 32).surface.m == 32
    assert apply_axis(sc, SweepAxis.BUDGET, 0.25).power_budget == 0.25
    assert apply_axis(sc, SweepAxis.RICIAN_K, 7).rician_k == 7.0
    moved = apply_axis(sc, SweepAxis.DISTANCE, 12.0)
    for u, v in zip(moved.users, sc.users):
        d = np.asarray(u.position) - sc.surface.center
        assert np.linalg.norm(d) == pytest.approx(12.0)
        assert u.side == v.side
    with pytest.raises(ValueError):
        apply_axis(sc, SweepAxis.ELEMENTS, 2.5)


def test_se_grows_with_elements():
    rows = run_sweep(small(), SweepAxis.ELEMENTS, [8, 16, 32], seed_policy="common")
    se = [r.aggregate.se_mean for r in rows]
    assert se[0] < se[1] < se[2]


def test_budget_doubling_adds_at_most_one_bit_per_user():
    sc = small()
    budgets = [0.25, 0.5, 1.0, 2.0]
    rows = run_sweep(sc, SweepAxis.BUDGET, budgets, seed_policy="common")
    se = np.array([r.aggregate.se_mean for r in rows])
    assert np.all(np.diff(se) > 0)
    assert np.all(np.diff(se) <= len(sc.users) + 1e-3)


def test_sweep_seed_policies():
    sc = small(trials=1)
    common = run_sweep(sc, SweepAxis.RICIAN_K, [1.0, 2.0], seed_policy="common")
    offset = run_sweep(sc, SweepAxis.RICIAN_K, [1.0, 2.0])
    assert [r.records[0].seed for r in common] == [0, 0]
    assert [r.records[0].seed for r in offset] == [0, 1000]


# -- NOMA ------------------------------------------------------------------------------------

def test_sic_order_and_pair():
    assert sic_order([2.0, 1.0]) == (0, 1)
    assert sic_order([1.0, 2.0]) == (1, 0)
    assert sic_order([1.0, 1.0]) == (0, 1)
    assert NomaPair(3, 5).decoding_order([0.1, 0.2]) == (5, 3)
    with pytest.raises(ValueError):
        NomaPair(power_split=1.0)
    with pytest.raises(ValueError):
        NomaPair(1, 1)


def test_noma_equal_gains_by_hand():
    snr = 7.0
    s, w = noma_rates(NomaPair(power_split=0.5), [1.0, 1.0], snr, 1.0)
    assert s == pytest.approx(np.log2(1 + 3.5))
    assert w == pytest.approx(np.log2(1 + 3.5 / 4.5))
    assert s + w == pytest.approx(np.log2(1 + snr))


def test_noma_limit_all_power_to_strong_user():
    s, w = noma_rates(NomaPair(power_split=1 - 1e-12), [4.0, 1.0], 1.0, 1.0)
    assert s == pytest.approx(np.log2(5.0), abs=1e-9)
    assert w == pytest.approx(0.0, abs=1e-9)


def test_noma_is_invariant_to_user_labelling():
    pair = NomaPair(power_split=0.3)
    assert noma_rates(pair, [2.0, 0.5], 1.0, 0.1) == noma_rates(pair, [0.5, 2.0], 1.0, 0.1)


def test_oma_by_hand_and_linear_in_time():
    r = oma_rates([3.0, 1.0], 1.0, 1.0, [0.25, 0.75])
    assert r == pytest.approx([0.25 * 2.0, 0.75 * 1.0])
    full = oma_rates([3.0, 1.0], 1.0, 1.0, [1.0, 0.0])
    assert r[0] == pytest.approx(0.25 * full[0])
    with pytest.raises(ValueError):
        oma_rates([3.0, 1.0], 1.0, 1.0, [0.5, 0.6])


def test_degenerate_gain_raises():
    with pytest.raises(DegenerateChannel):
        noma_rates(NomaPair(), [1.0, 0.0], 1.0, 1.0)
    with pytest.raises(DegenerateChannel):
        optimize_oma([1e-20, 1.0], 1.0, 1.0)


def test_split_grid_is_interior():
    g = split_grid()
    assert g.size == 256 and g[0] > 0 and g[-1] < 1


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
def test_noma_never_below_oma(g1, g2, snr):
    _, noma = optimize_noma([g1, g2], snr, 1.0)
    _, oma = optimize_oma([g1, g2], snr, 1.0)
    assert noma >= oma - 1e-12


def test_run_noma_on_siso_pair():
    recs = run_noma(siso())
    assert len(recs) == 3
    for r in recs:
        assert r.noma_sum_rate >= r.oma_sum_rate
        assert 0 < r.alpha < 1 and 0 < r.tau < 1
    with pytest.raises(ScenarioMismatch):
        run_noma(small())
