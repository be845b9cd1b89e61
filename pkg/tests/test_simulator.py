import csv

import numpy as np
import pytest

from aoi_energy import CMDPArrays, SystemConfig, evaluate_policy, solve_cmdp
from aoi_energy.simulator import (
    EmptyHorizonError, baseline_generation, baseline_retransmission, simulate, simulate_replicas,
    trapezoid_average_age,
)

HALF = 1 / np.log(2)  # rate 1 over a unit-mean exponential: failure probability 1/2


def test_same_seed_same_path(k128_model):
    cfg = SystemConfig()
    pol = baseline_retransmission(cfg.c_max, k128_model, cfg)
    a = simulate(pol, cfg, 5000, 11, trace=True)
    b = simulate(pol, cfg, 5000, 11, trace=True)
    assert a.trace.gain == b.trace.gain and a.time_avg_age == b.time_avg_age
    assert simulate(pol, cfg, 5000, 12).time_avg_age != a.time_avg_age


def test_generation_geometric_age(k128_model):
    cfg = SystemConfig()
    pol = baseline_generation(HALF, k128_model, cfg)
    s = simulate_replicas(pol, cfg, 100_000, range(10))
    assert abs(s.mean["discrete_avg_age"] - 2.0) <= 3 * s.stderr["discrete_avg_age"]
    m, _ = evaluate_policy(pol, cfg)
    assert s.mean["energy_efficiency"] == pytest.approx(HALF / (HALF + cfg.p_s), rel=1e-12)
    assert m.energy_efficiency == pytest.approx(HALF / (HALF + cfg.p_s), rel=1e-12)


def test_retransmission_failure_rate(k128_model):
    cfg = SystemConfig()
    pol = baseline_retransmission(10 ** -0.3, k128_model, cfg)
    assert pol.model.failure_probs[0] == pytest.approx(0.8640, abs=5e-5)
    s = simulate(pol, cfg, 200_000, 3)
    f = s.level_failures[0] / s.level_attempts[0]
    eps = pol.model.failure_probs[0]
    assert abs(f - eps) <= 3 * np.sqrt(eps * (1 - eps) / s.level_attempts[0])


def test_single_round_retransmission_is_generation(k128_model):
    cfg = SystemConfig(M=1)
    r = baseline_retransmission(0.4, k128_model, cfg)
    g = baseline_generation(0.4, k128_model, cfg)
    assert np.array_equal(r.kinds, g.kinds) and np.array_equal(r.levels, g.levels)
    assert simulate(r, cfg, 20_000, 5).time_avg_age == simulate(g, cfg, 20_000, 5).time_avg_age


def test_huge_power_delivers_every_slot(k128_model):
    cfg = SystemConfig()
    s = simulate(baseline_generation(1e9, k128_model, cfg), cfg, 50_000, 0)
    assert s.time_avg_age == pytest.approx(1.5, abs=1e-3)


def test_per_level_failure_frequencies(k128_model):
    cfg = SystemConfig()
    sol = solve_cmdp(k128_model, cfg)
    s = simulate(sol.policy_minus, cfg, 300_000, 7)
    eps = np.asarray(k128_model.failure_probs)
    used = np.flatnonzero(s.level_attempts >= 1000)
    assert len(used) > 0
    for i in used:
        n = s.level_attempts[i]
        assert abs(s.level_failures[i] / n - eps[i]) <= 4 * np.sqrt(eps[i] * (1 - eps[i]) / n) + 1e-12


def test_trapezoid_identity(k128_model):
    # M large enough that no packet is discarded on this path
    cfg = SystemConfig(M=60, delta_max=100)
    pol = baseline_retransmission(0.6, k128_model, cfg)
    s = simulate(pol, cfg, 20_000, 9, trace=True)
    tr = s.trace
    last = tr.deliveries[-1]
    direct = np.mean(tr.age[:last]) + 0.5
    assert trapezoid_average_age(tr.intervals(), y0=1.0) == pytest.approx(direct, rel=1e-12)


def test_energy_ledger(k128_model):
    cfg = SystemConfig(sensing_power=0.2)
    sol = solve_cmdp(k128_model, cfg)
    s = simulate(sol.policy_minus, cfg, 50_000, 4)
    assert s.transmit_energy == pytest.approx(s.packet_energies.sum() + s.unattributed_energy, rel=1e-12)
    assert s.avg_total_power * s.horizon == pytest.approx(s.transmit_energy + s.packets_generated * 0.2, rel=1e-12)
    assert len(s.packet_energies) == s.packets_generated


@pytest.mark.parametrize("overflow", ["wrap", "saturate"])
def test_steps_follow_kernel(k128_model, overflow):
    cfg = SystemConfig(M=3, delta_max=12, overflow=overflow)
    arr = CMDPArrays(k128_model, cfg)
    pol = baseline_retransmission(0.05, k128_model, cfg, quantized=True)
    s = simulate(pol, cfg, 20_000, 2, truncate=True, trace=True)
    tr = s.trace
    flat = pol.flat()
    for t in range(len(tr.t) - 1):
        i = arr.index[tr.age[t], tr.round[t]]
        j = flat[i]
        assert (tr.kind[t], tr.level[t]) == tuple(pol.action(arr.states[i]))
        nxt = arr.ok_sa[i, j] if tr.success[t] else arr.fail_sa[i, j]
        assert arr.states[nxt] == (tr.age[t + 1], tr.round[t + 1])
    m, _ = evaluate_policy(pol, cfg)
    assert abs(s.time_avg_age - m.avg_age) < 0.05 * m.avg_age


def test_mixed_policy_hits_mixed_averages(k128_model):
    cfg = SystemConfig()
    sol = solve_cmdp(k128_model, cfg)
    s = simulate_replicas(sol.mixed_policy(), cfg, 200_000, range(5))
    assert abs(s.mean["time_avg_age"] - sol.mixed_age) <= 4 * s.stderr["time_avg_age"] + 1e-3
    assert abs(s.mean["avg_transmit_power"] - sol.mixed_cost) <= 4 * s.stderr["avg_transmit_power"] + 1e-3


def test_empty_horizon(k128_model):
    cfg = SystemConfig()
    with pytest.raises(EmptyHorizonError):
        simulate(baseline_generation(1.0, k128_model, cfg), cfg, 0, 0)


def test_trace_csv(k128_model, tmp_path):
    cfg = SystemConfig()
    s = simulate(baseline_generation(1.0, k128_model, cfg), cfg, 100, 0, trace=True)
    path = tmp_path / "trace.csv"
    s.trace.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["t", "age", "round", "kind", "level", "gain", "success"]
    assert len(rows) == 100 and float(rows[0]["gain"]) == s.trace.gain[0]
