"""Monte Carlo sample paths of the slotted system.

Each slot draws a continuous channel gain by inverse-CDF sampling and the
transmission at level ``k`` succeeds iff the gain reaches ``z_k``.  The age
is not truncated unless ``truncate=True``; beyond ``delta_max`` the policy
acts as it does at ``delta_max``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import evaluate_policy
from .channel import ChannelModel, quantize_with_thresholds
from .cmdp import GENERATE, KINDS, MixedPolicy, Policy, SystemConfig, build_state_space

CHUNK = 65536


class EmptyHorizonError(ValueError):
    pass


@dataclass
class Trace:
    t: list[int] = field(default_factory=list)
    age: list[int] = field(default_factory=list)
    round: list[int] = field(default_factory=list)
    kind: list[str] = field(default_factory=list)
    level: list[int] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)
    success: list[bool] = field(default_factory=list)
    deliveries: list[int] = field(default_factory=list)

    def intervals(self, start: int = 0) -> np.ndarray:
        """Inter-delivery times ``Y_k``; delivery epochs count from ``start``."""
        return np.diff(np.concatenate(([start], self.deliveries)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "age", "round", "kind", "level", "gain", "success"])
            for row in zip(self.t, self.age, self.round, self.kind, self.level, self.gain, self.success):
                w.writerow([row[0], row[1], row[2], row[3], row[4], repr(float(row[5])), int(row[6])])


@dataclass
class SimulationStats:
    horizon: int
    seed: int
    time_avg_age: float
    discrete_avg_age: float
    avg_transmit_power: float
    avg_total_power: float
    energy_efficiency: float
    packets_generated: int
    packets_delivered: int
    fresh_packets: int
    transmit_energy: float
    packet_energies: np.ndarray = field(repr=False)
    unattributed_energy: float = 0.0
    level_attempts: np.ndarray = field(default=None, repr=False)
    level_failures: np.ndarray = field(default=None, repr=False)
    trace: Trace | None = field(default=None, repr=False)


def _table(policy: Policy, model: ChannelModel, cfg: SystemConfig):
    """table[age][round] -> (is_generate, level, threshold, transmit power)."""
    table = [[None] * (cfg.M + 1) for _ in range(cfg.delta_max + 1)]
    thr = np.asarray(model.thresholds)
    pw = np.asarray(model.powers)
    for s, k, lv in zip(build_state_space(cfg.M, cfg.delta_max), policy.kinds, policy.levels):
        lv = int(lv)
        table[s.age][s.round] = (bool(k == 1), lv, float(thr[lv]), float(pw[lv - 1]))
    return table


def _switch_probability(mixed: MixedPolicy, cfg: SystemConfig) -> float:
    """Probability of running ``minus`` for a cycle between visits to (1, 1).

    Cycles under the two policies have different mean lengths, so the draw is
    reweighted to make the long-run fraction of time under ``minus`` equal xi.
    """
    xi = mixed.xi
    if xi in (0.0, 1.0):
        return xi
    # the state space is age-major, so (1, 1) is index 0
    L_minus = 1.0 / evaluate_policy(mixed.minus, cfg)[1][0]
    L_plus = 1.0 / evaluate_policy(mixed.plus, cfg)[1][0]
    return xi * L_plus / (xi * L_plus + (1.0 - xi) * L_minus)


def simulate(
    policy: Policy | MixedPolicy,
    cfg: SystemConfig,
    horizon: int,
    seed: int,
    truncate: bool = False,
    trace: bool = False,
) -> SimulationStats:
    """Run one sample path of ``horizon`` slots from state (1, 1)."""
    if horizon < 1:
        raise EmptyHorizonError("horizon must be at least one slot")
    if isinstance(policy, MixedPolicy):
        model = policy.minus.model
        tables = [_table(policy.minus, model, cfg), _table(policy.plus, model, cfg)]
        q_minus = _switch_probability(policy, cfg)
    else:
        model = policy.model
        tables = [_table(policy, model, cfg)]
        q_minus = 1.0

    gain_rng, mix_rng = (np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(2))
    quantile = model.dist.quantile
    M, dmax, ps = cfg.M, cfg.delta_max, cfg.p_s
    charge_discard = cfg.charge_sensing_on_discard
    wrap = cfg.overflow == "wrap"
    K = model.K
    attempts = [0] * (K + 1)
    failures = [0] * (K + 1)
    tr = Trace() if trace else None

    def pick():
        if len(tables) == 1:
            return tables[0]
        return tables[0] if mix_rng.random() < q_minus else tables[1]

    table = pick()
    d, m = 1, 1
    age_sum = 0
    energy = 0.0
    n_gen = 0
    n_fresh = 0
    delivered = 0
    packet_energies: list[float] = []
    current = -1
    unattributed = 0.0

    t = 0
    while t < horizon:
        n = min(CHUNK, horizon - t)
        gains = quantile(gain_rng.random(n))
        for z in gains.tolist():
            is_g, lv, thr, pw = table[d if d <= dmax else dmax][m]
            age_sum += d
            energy += pw
            if is_g:
                n_gen += 1
                packet_energies.append(0.0)
                current = len(packet_energies) - 1
            if is_g or m == 1:
                n_fresh += 1
            if current >= 0:
                packet_energies[current] += pw
            else:
                unattributed += pw
            ok = z >= thr
            attempts[lv] += 1
            if tr is not None:
                tr.t.append(t)
                tr.age.append(d)
                tr.round.append(m)
                tr.kind.append(KINDS[is_g])
                tr.level.append(lv)
                tr.gain.append(z)
                tr.success.append(ok)
            if ok:
                delivered += 1
                if tr is not None:
                    tr.deliveries.append(t + 1)
                d, m = (1, 1) if is_g else (m, 1)
            else:
                failures[lv] += 1
                if is_g:
                    d, m = d + 1, (2 if M > 1 else 1)
                elif m < M:
                    d, m = d + 1, m + 1
                else:
                    d, m = d + 1, 1
                    if charge_discard:
                        n_gen += 1
                        packet_energies.append(0.0)
                        current = len(packet_energies) - 1
                if truncate and d > dmax:
                    d, m = (1, 1) if wrap else (dmax, m)
            if d == 1 and m == 1 and len(tables) > 1:
                table = pick()
            t += 1

    sensing = n_gen * ps
    total = energy + sensing
    psi = energy / total if total > 0 else 0.0
    return SimulationStats(
        horizon=horizon,
        seed=seed,
        time_avg_age=age_sum / horizon + 0.5,
        discrete_avg_age=age_sum / horizon,
        avg_transmit_power=energy / horizon,
        avg_total_power=total / horizon,
        energy_efficiency=psi,
        packets_generated=n_gen,
        packets_delivered=delivered,
        fresh_packets=n_fresh,
        transmit_energy=energy,
        packet_energies=np.array(packet_energies),
        unattributed_energy=unattributed,
        level_attempts=np.array(attempts[1:]),
        level_failures=np.array(failures[1:]),
        trace=tr,
    )


@dataclass(frozen=True)
class ReplicaSummary:
    mean: dict
    stderr: dict
    replicas: list[SimulationStats]


SUMMARY_FIELDS = ("time_avg_age", "discrete_avg_age", "avg_transmit_power", "avg_total_power", "energy_efficiency")


def simulate_replicas(policy, cfg, horizon, seeds, truncate=False) -> ReplicaSummary:
    runs = [simulate(policy, cfg, horizon, s, truncate=truncate) for s in seeds]
    mean, err = {}, {}
    for name in SUMMARY_FIELDS:
        v = np.array([getattr(r, name) for r in runs])
        mean[name] = float(v.mean())
        err[name] = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
    return ReplicaSummary(mean, err, runs)


def trapezoid_average_age(intervals, y0: float = 0.0) -> float:
    """Average age from inter-delivery times, summing trapezoid areas.

    The age right after a delivery equals the interval that just ended, so
    interval ``k`` contributes ``(2*Y_{k-1} + Y_k) * Y_k / 2``.
    """
    y = np.asarray(intervals, dtype=float)
    prev = np.concatenate(([y0], y[:-1]))
    return float(np.sum((2.0 * prev + y) * y) / (2.0 * np.sum(y)))


def _continuous_model(model: ChannelModel, power_watts: float) -> ChannelModel:
    z = (2.0**model.rate - 1.0) / power_watts
    return quantize_with_thresholds(model.dist, [z], model.rate)


def _baseline_level(model: ChannelModel, power_watts: float) -> int:
    """Most powerful quantized level not above ``power_watts``."""
    ok = np.flatnonzero(np.asarray(model.powers) <= power_watts)
    return int(ok[0]) + 1


def baseline_retransmission(
    power_watts: float, model: ChannelModel, cfg: SystemConfig, quantized: bool = False
) -> Policy:
    """Sense a new packet when none is pending, otherwise retransmit, at fixed power."""
    if not power_watts > 0:
        raise ValueError("baseline power must be positive")
    if quantized:
        level, base = _baseline_level(model, power_watts), model
    else:
        level, base = 1, _continuous_model(model, power_watts)
    states = build_state_space(cfg.M, cfg.delta_max)
    kinds = np.array([1 if s.round == 1 else 0 for s in states], dtype=np.int8)
    levels = np.full(len(states), level, dtype=np.int64)
    return Policy(base, cfg.M, cfg.delta_max, kinds, levels, "retransmission")


def baseline_generation(
    power_watts: float, model: ChannelModel, cfg: SystemConfig, quantized: bool = False
) -> Policy:
    """Sense and send a fresh packet in every slot at fixed power."""
    if not power_watts > 0:
        raise ValueError("baseline power must be positive")
    if quantized:
        level, base = _baseline_level(model, power_watts), model
    else:
        level, base = 1, _continuous_model(model, power_watts)
    n = len(build_state_space(cfg.M, cfg.delta_max))
    return Policy(
        base, cfg.M, cfg.delta_max, np.ones(n, dtype=np.int8), np.full(n, level, dtype=np.int64), "generation"
    )
