import math

import numpy as np
import pytest

from aoi_energy import (
    Action, CMDPArrays, ConfigError, State, SystemConfig, build_state_space, exponential_gain,
    lagrangian_reward, quantize_channel, quantize_with_thresholds, slot_cost, transitions,
)


def test_state_space_counts():
    assert len(build_state_space(4, 100)) == sum(min(d, 4) for d in range(1, 101)) == 394
    assert build_state_space(1, 3) == [(1, 1), (2, 1), (3, 1)]
    assert build_state_space(2, 2) == [(1, 1), (2, 1), (2, 2)]
    with pytest.raises(ConfigError):
        build_state_space(4, 3)


@pytest.fixture
def m4():
    return quantize_channel(exponential_gain(), 4, 1.0)


def test_transition_examples(m4):
    cfg = SystemConfig(M=4, delta_max=100)
    k = 2
    e = m4.failure_probs[k - 1]
    assert transitions(State(3, 2), Action("r", k), m4, cfg) == {(4, 3): e, (2, 1): 1 - e}
    assert transitions(State(5, 4), Action("r", k), m4, cfg) == {(6, 1): e, (4, 1): 1 - e}
    assert transitions(State(5, 3), Action("g", k), m4, cfg) == {(6, 2): e, (1, 1): 1 - e}
    assert transitions(State(100, 2), Action("g", k), m4, cfg) == {(1, 1): 1.0}


def test_kernel_rows_and_supports(m4):
    cfg = SystemConfig(M=3, delta_max=12)
    states = set(build_state_space(cfg.M, cfg.delta_max))
    for s in states:
        for kind in "rg":
            for k in range(1, m4.K + 1):
                row = transitions(s, Action(kind, k), m4, cfg)
                assert abs(sum(row.values()) - 1) <= 1e-12
                assert set(row) <= states
                for t in row:
                    assert t.round <= min(t.age, cfg.M)
                if k == m4.K:
                    # silence never resets the age
                    (t,) = row
                    assert t.age == (s.age + 1 if s.age < cfg.delta_max else 1)
                else:
                    ok = (1, 1) if kind == "g" else (s.round, 1)
                    assert ok in row


def test_arrays_match_scalar_kernel(m4):
    cfg = SystemConfig(M=3, delta_max=10, charge_sensing_on_discard=True)
    arr = CMDPArrays(m4, cfg)
    for i, s in enumerate(arr.states):
        for j in range(arr.n_actions):
            a = arr.action_of(j)
            assert arr.action_index(a) == j
            P = arr.policy_matrix(np.full(arr.n_states, j))
            row = transitions(s, a, m4, cfg)
            dense = np.zeros(arr.n_states)
            for t, p in row.items():
                dense[arr.index[t]] += p
            np.testing.assert_allclose(P[i], dense, atol=1e-15)
            c = slot_cost(a, m4, cfg, s)
            assert arr.total[i, j] == pytest.approx(c.total)
            assert arr.transmit[i, j] == c.transmit


def test_full_size_kernel_rows_sum_to_one(k128_model):
    arr = CMDPArrays(k128_model, SystemConfig())
    for j in range(arr.n_actions):
        P = arr.policy_matrix(np.full(arr.n_states, j))
        assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12


@pytest.fixture
def one_watt():
    # z_1 = 1 and R = 1 give P_1 = 1 W
    return quantize_with_thresholds(exponential_gain(), [1.0], 1.0)


def test_slot_cost_examples(one_watt):
    cfg = SystemConfig(sensing_power=0.5)
    assert slot_cost(Action("r", 1), one_watt, cfg) == (1.0, 1.0)
    assert slot_cost(Action("g", 1), one_watt, cfg) == (1.5, 1.0)
    assert slot_cost(Action("g", 2), one_watt, cfg) == (0.5, 0.0)


def test_discard_charge_flag(one_watt):
    cfg = SystemConfig(M=2, sensing_power=0.5, charge_sensing_on_discard=True)
    eps = one_watt.failure_probs[0]
    assert slot_cost(Action("r", 1), one_watt, cfg, State(3, 2)).total == pytest.approx(1.0 + 0.5 * eps)
    assert slot_cost(Action("r", 1), one_watt, cfg, State(3, 1)).total == 1.0


def test_lagrangian_reward_examples(one_watt):
    cfg = SystemConfig(sensing_power=0.2)
    assert lagrangian_reward(State(3, 1), Action("g", 1), 1.0, 0.5, one_watt, cfg) == pytest.approx(5.2)
    assert lagrangian_reward(State(1, 1), Action("r", 2), 7.0, 3.0, one_watt, cfg) == 1.5
    assert lagrangian_reward(State(9, 2), Action("g", 1), 1e-300, 0.0, one_watt, cfg) == pytest.approx(9.5)


def test_single_round_discards_failed_packets(m4):
    cfg = SystemConfig(M=1, delta_max=5)
    assert transitions(State(2, 1), Action("g", 1), m4, cfg) == {(3, 1): 0.25, (1, 1): 0.75}
    assert transitions(State(2, 1), Action("r", 1), m4, cfg) == {(3, 1): 0.25, (1, 1): 0.75}


def test_saturating_overflow(m4):
    cfg = SystemConfig(M=2, delta_max=5, overflow="saturate")
    assert transitions(State(5, 2), Action("r", 4), m4, cfg) == {(5, 1): 1.0}
    assert transitions(State(5, 1), Action("g", 4), m4, cfg) == {(5, 2): 1.0}


@pytest.mark.parametrize(
    "kw, keys",
    [
        (dict(M=0), ("M",)),
        (dict(M=5, delta_max=4), ("delta_max", "M")),
        (dict(c_max=0.0), ("c_max",)),
        (dict(omega=0.0), ("omega",)),
        (dict(gamma=1.0), ("gamma",)),
        (dict(tol_v=0.0), ("tol_eta", "tol_v")),
        (dict(overflow="clip"), ("overflow",)),
    ],
)
def test_config_validation(kw, keys):
    with pytest.raises(ConfigError) as info:
        SystemConfig(**kw)
    assert info.value.keys == keys


def test_sensing_power_from_alpha():
    assert SystemConfig(c_max=0.8, alpha=0.25).p_s == pytest.approx(0.2)
    assert SystemConfig(c_max=0.8, alpha=0.25, sensing_power=1.0).p_s == 1.0
    assert math.isclose(SystemConfig().c_max, 0.501187, rel_tol=1e-6)
