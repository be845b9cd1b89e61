"""Exact long-run analysis of the Markov chain induced by a stationary policy."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .cmdp import CMDPArrays, MixedPolicy, Policy, State, SystemConfig

log = logging.getLogger(__name__)


class SteadyStateError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InducedChain:
    states: list[State]
    matrix: np.ndarray


@dataclass(frozen=True)
class Metrics:
    """Long-run averages per slot.

    ``avg_age`` includes the half-slot term of the continuous sawtooth when
    ``half_slot`` is set.  ``silent`` flags a policy that never transmits,
    whose efficiency is reported as 0.
    """

    avg_age: float
    avg_total_power: float
    avg_transmit_power: float
    energy_efficiency: float
    generation_rate: float
    half_slot: bool = True
    silent: bool = False

    def objective(self, omega: float) -> float:
        return self.avg_age + omega * self.avg_total_power


def _arrays(policy: Policy, cfg: SystemConfig) -> CMDPArrays:
    if (policy.M, policy.delta_max) != (cfg.M, cfg.delta_max):
        raise ValueError("policy and config disagree on the state space")
    return CMDPArrays(policy.model, cfg)


def induced_chain(policy: Policy, cfg: SystemConfig, arrays: CMDPArrays | None = None) -> InducedChain:
    arrays = arrays or _arrays(policy, cfg)
    return InducedChain(arrays.states, arrays.policy_matrix(policy.flat()))


def _power_iteration(P: np.ndarray, tol=1e-14, max_iter=1_000_000) -> np.ndarray:
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    # lazy chain: same stationary law, no periodicity trouble
    L = 0.5 * (P + np.eye(P.shape[0]))
    for _ in range(max_iter):
        nxt = pi @ L
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise SteadyStateError("power iteration did not converge")


def stationary_distribution(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Stationary law of a row-stochastic matrix with one recurrent class."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
        ok = np.all(np.isfinite(pi)) and pi.min() > -tol
    except np.linalg.LinAlgError:
        ok = False
    if ok:
        pi = np.maximum(pi, 0.0)
        pi /= pi.sum()
        if np.max(np.abs(pi @ P - pi)) <= tol:
            return pi
    log.warning("direct steady-state solve failed; falling back to power iteration")
    pi = _power_iteration(P)
    if np.max(np.abs(pi @ P - pi)) > tol:
        raise SteadyStateError("no stationary distribution within tolerance")
    return pi


def steady_state(chain: InducedChain) -> np.ndarray:
    return stationary_distribution(chain.matrix)


def average_metrics(
    pi: np.ndarray,
    policy: Policy,
    cfg: SystemConfig,
    half_slot: bool = True,
    arrays: CMDPArrays | None = None,
) -> Metrics:
    arrays = arrays or _arrays(policy, cfg)
    flat = policy.flat()
    rows = np.arange(arrays.n_states)
    age = float(pi @ arrays.age) + (0.5 if half_slot else 0.0)
    c = float(pi @ arrays.transmit[rows, flat])
    p = float(pi @ arrays.total[rows, flat])
    gen = float(pi @ arrays.generate_weight[rows, flat])
    return _finish(age, p, c, gen, half_slot)


def _finish(age, p, c, gen, half_slot) -> Metrics:
    silent = p <= 0.0 or c <= 0.0
    psi = 0.0 if p <= 0.0 else c / p
    return Metrics(age, p, c, psi, gen, half_slot, silent)


def evaluate_policy(
    policy: Policy, cfg: SystemConfig, half_slot: bool = True, arrays: CMDPArrays | None = None
) -> tuple[Metrics, np.ndarray]:
    """Metrics and stationary distribution of ``policy``."""
    arrays = arrays or _arrays(policy, cfg)
    pi = stationary_distribution(arrays.policy_matrix(policy.flat()))
    return average_metrics(pi, policy, cfg, half_slot, arrays), pi


def mix_metrics(minus: Metrics, plus: Metrics, xi: float) -> Metrics:
    """Time-sharing mixture; efficiency is the ratio of the mixed powers."""
    mix = lambda a, b: xi * a + (1.0 - xi) * b  # noqa: E731
    return _finish(
        mix(minus.avg_age, plus.avg_age),
        mix(minus.avg_total_power, plus.avg_total_power),
        mix(minus.avg_transmit_power, plus.avg_transmit_power),
        mix(minus.generation_rate, plus.generation_rate),
        minus.half_slot,
    )


def evaluate_mixed(policy: MixedPolicy, cfg: SystemConfig, half_slot: bool = True) -> Metrics:
    m_minus, _ = evaluate_policy(policy.minus, cfg, half_slot)
    m_plus, _ = evaluate_policy(policy.plus, cfg, half_slot)
    return mix_metrics(m_minus, m_plus, policy.xi)


def discrete(m: Metrics) -> Metrics:
    """Same metrics without the half-slot term."""
    if not m.half_slot:
        return m
    return replace(m, avg_age=m.avg_age - 0.5, half_slot=False)
