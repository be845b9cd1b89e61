import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoi_energy import (
    CMDPArrays, Policy, SystemConfig, average_metrics, evaluate_policy, induced_chain,
    mix_metrics, steady_state,
)
from aoi_energy.analysis import Metrics, SteadyStateError, discrete, stationary_distribution
from aoi_energy.simulator import baseline_generation, baseline_retransmission


def constant_policy(model, cfg, kind, level):
    n = len(CMDPArrays(model, cfg).states)
    return Policy(model, cfg.M, cfg.delta_max, np.full(n, kind, np.int8), np.full(n, level, np.int64))


def test_generation_chain_rows(unit_model):
    cfg = SystemConfig(M=2, delta_max=3, sensing_power=0.5)
    chain = induced_chain(constant_policy(unit_model, cfg, 1, 1), cfg)
    idx = {s: i for i, s in enumerate(chain.states)}
    P = chain.matrix
    assert P[idx[1, 1], idx[2, 2]] == 0.5 and P[idx[1, 1], idx[1, 1]] == 0.5
    assert P[idx[2, 2], idx[3, 2]] == 0.5 and P[idx[2, 2], idx[1, 1]] == 0.5
    assert P[idx[3, 2], idx[1, 1]] == 1.0


def test_generation_chain_steady_state_and_metrics(unit_model):
    cfg = SystemConfig(M=2, delta_max=3, sensing_power=0.5)
    pol = constant_policy(unit_model, cfg, 1, 1)
    chain = induced_chain(pol, cfg)
    pi = steady_state(chain)
    idx = {s: i for i, s in enumerate(chain.states)}
    assert pi[idx[1, 1]] == pytest.approx(4 / 7, abs=1e-14)
    assert pi[idx[2, 2]] == pytest.approx(2 / 7, abs=1e-14)
    assert pi[idx[3, 2]] == pytest.approx(1 / 7, abs=1e-14)
    # (2,1), (3,1) are never entered under this policy
    assert pi[idx[2, 1]] == 0 and pi[idx[3, 1]] == 0
    m = average_metrics(pi, pol, cfg, half_slot=False)
    assert m.avg_age == pytest.approx(11 / 7, abs=1e-14)
    assert m.avg_transmit_power == pytest.approx(1.0)
    assert m.avg_total_power == pytest.approx(1.5)
    assert m.energy_efficiency == pytest.approx(2 / 3)
    assert average_metrics(pi, pol, cfg).avg_age == pytest.approx(11 / 7 + 0.5)


def test_cycle_and_absorbing():
    L = 5
    P = np.roll(np.eye(L), 1, axis=1)
    np.testing.assert_allclose(stationary_distribution(P), np.full(L, 1 / L), atol=1e-14)
    P = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(stationary_distribution(P), [0, 0, 1], atol=1e-14)


def test_power_iteration_fallback(monkeypatch):
    def broken(*a, **k):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(np.linalg, "solve", broken)
    P = np.array([[0.1, 0.9], [0.6, 0.4]])
    np.testing.assert_allclose(stationary_distribution(P), [0.4, 0.6], atol=1e-12)


def test_fallback_failure_raises(monkeypatch):
    monkeypatch.setattr(np.linalg, "solve", lambda *a, **k: np.full(2, np.nan))
    import aoi_energy.analysis as an

    monkeypatch.setattr(an, "_power_iteration", lambda P: np.array([1.0, 0.0]))
    with pytest.raises(SteadyStateError):
        stationary_distribution(np.array([[0.1, 0.9], [0.6, 0.4]]))


@pytest.mark.parametrize("kind", [0, 1])
def test_always_silent(unit_model, kind):
    cfg = SystemConfig(M=2, delta_max=7, sensing_power=0.3)
    pol = constant_policy(unit_model, cfg, kind, 2)
    m, pi = evaluate_policy(pol, cfg)
    # deterministic cycle over the ages 1..delta_max
    ages = np.array([s.age for s in pol.states])
    for d in range(1, 8):
        assert pi[ages == d].sum() == pytest.approx(1 / 7)
    assert m.avg_age == pytest.approx((7 + 1) / 2 + 0.5)
    assert m.avg_transmit_power == 0 and m.energy_efficiency == 0 and m.silent
    assert m.avg_total_power == pytest.approx(0.3 * m.generation_rate)


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_power_decomposition_and_residual(k128_model, data):
    cfg = SystemConfig()
    arr = CMDPArrays(k128_model, cfg)
    flat = np.array(data.draw(st.lists(st.integers(0, arr.n_actions - 1), min_size=arr.n_states, max_size=arr.n_states)))
    pol = Policy.from_flat(arr, flat)
    m, pi = evaluate_policy(pol, cfg, arrays=arr)
    assert np.max(np.abs(pi @ arr.policy_matrix(flat) - pi)) <= 1e-10
    assert abs(pi.sum() - 1) <= 1e-12
    assert m.avg_total_power - m.avg_transmit_power == pytest.approx(cfg.p_s * m.generation_rate, abs=1e-12)


def test_mixture_is_affine():
    a = Metrics(5.0, 2.0, 1.5, 0.75, 0.25)
    b = Metrics(3.0, 1.0, 0.5, 0.5, 0.5)
    m = mix_metrics(a, b, 0.25)
    assert m.avg_age == pytest.approx(3.5)
    assert m.avg_total_power == pytest.approx(1.25)
    assert m.avg_transmit_power == pytest.approx(0.75)
    assert m.energy_efficiency == pytest.approx(0.75 / 1.25)
    assert m.generation_rate == pytest.approx(0.4375)


def test_generation_baseline_geometric_age(k128_model):
    cfg = SystemConfig(M=4, delta_max=100)
    pol = baseline_generation(1 / np.log(2), k128_model, cfg)
    assert pol.model.failure_probs[0] == pytest.approx(0.5)
    m, _ = evaluate_policy(pol, cfg)
    assert discrete(m).avg_age == pytest.approx(2.0, abs=1e-12)
    assert m.energy_efficiency == pytest.approx((1 / np.log(2)) / (1 / np.log(2) + cfg.p_s))


def test_retransmission_renewal_formula(k128_model):
    # M=20, eps=1/2: deliveries reset the age to the rounds the packet took
    cfg = SystemConfig(M=20, delta_max=60)
    pol = baseline_retransmission(1 / np.log(2), k128_model, cfg)
    m, _ = evaluate_policy(pol, cfg)
    p = 0.5
    EY, EY2 = 1 / p, (2 - p) / p**2
    renewal = (2 * EY**2 + EY2) / (2 * EY)
    # discards after 20 failures and the wrap at delta_max leave a ~2e-5 residue
    assert m.avg_age == pytest.approx(renewal, abs=1e-4)
    assert discrete(m).avg_age == pytest.approx(renewal - 0.5, abs=1e-4)
