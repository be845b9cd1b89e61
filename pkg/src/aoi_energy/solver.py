"""Lagrangian relaxation of the constrained problem.

For a fixed multiplier ``eta`` the constrained problem becomes an ordinary
discounted MDP with per-slot reward ``age + 1/2 + omega*p + eta*c``, solved
by value iteration on the ``(1 - gamma)``-normalized Bellman operator.
Bisection on ``eta`` then brackets the budget ``c_max`` between two
deterministic policies, and the optimum time-shares between them.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .analysis import Metrics, evaluate_policy, mix_metrics
from .channel import ChannelModel
from .cmdp import CMDPArrays, MixedPolicy, Policy, SystemConfig

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12


class ConvergenceError(RuntimeError):
    pass


class MonotonicityError(RuntimeError):
    """Average transmit power increased with the multiplier."""


class VIResult(NamedTuple):
    values: np.ndarray
    policy: Policy
    iterations: int
    residual: float


def _rewards(arrays: CMDPArrays, eta: float, omega: float) -> np.ndarray:
    return arrays.age[:, None] + 0.5 + omega * arrays.total + eta * arrays.transmit


def _q(arrays: CMDPArrays, V: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    eps = arrays.action_eps[None, :]
    nxt = eps * V[arrays.fail_sa] + (1.0 - eps) * V[arrays.ok_sa]
    return (1.0 - gamma) * r + gamma * nxt


def _greedy(arrays: CMDPArrays, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    qmin = Q.min(axis=1)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(qmin))
    near = Q <= (qmin + tol)[:, None]
    flat = np.where(near, arrays.tie_rank, arrays.n_actions).argmin(axis=1)
    return qmin, flat


def bellman_update(
    V: np.ndarray,
    eta: float,
    omega: float,
    model: ChannelModel,
    cfg: SystemConfig,
    arrays: CMDPArrays | None = None,
) -> tuple[np.ndarray, Policy]:
    """One application of the normalized Bellman operator and its greedy policy."""
    arrays = arrays or CMDPArrays(model, cfg)
    Q = _q(arrays, np.asarray(V, dtype=float), _rewards(arrays, eta, omega), cfg.gamma)
    qmin, flat = _greedy(arrays, Q)
    return qmin, Policy.from_flat(arrays, flat)


def policy_values(arrays: CMDPArrays, flat: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    """Normalized discounted value of a fixed policy: solves (I - gamma P) v = (1 - gamma) r."""
    rows = np.arange(arrays.n_states)
    P = arrays.policy_matrix(flat)
    return np.linalg.solve(np.eye(arrays.n_states) - gamma * P, (1.0 - gamma) * r[rows, flat])


def value_iteration(
    eta: float,
    omega: float,
    model: ChannelModel,
    cfg: SystemConfig,
    V0: np.ndarray | None = None,
    accelerate: bool = True,
    max_iter: int | None = None,
    arrays: CMDPArrays | None = None,
) -> VIResult:
    """Iterate the Bellman operator until successive iterates differ by at most ``tol_v``.

    With ``accelerate`` the iterate is replaced by the exact value of the
    greedy policy whenever that policy repeats between two sweeps.  This
    only shortens the path; termination is still decided on two plain
    successive Bellman iterates.
    """
    arrays = arrays or CMDPArrays(model, cfg)
    max_iter = cfg.max_iter if max_iter is None else max_iter
    gamma = cfg.gamma
    r = _rewards(arrays, eta, omega)
    V = np.zeros(arrays.n_states) if V0 is None else np.array(V0, dtype=float)
    prev_flat = None
    evaluated = None
    for n in range(1, max_iter + 1):
        V_new, flat = _greedy(arrays, _q(arrays, V, r, gamma))
        residual = float(np.max(np.abs(V_new - V)))
        if residual <= cfg.tol_v:
            log.debug("value iteration eta=%.6g converged in %d sweeps", eta, n)
            return VIResult(V_new, Policy.from_flat(arrays, flat), n, residual)
        V = V_new
        if accelerate and prev_flat is not None and np.array_equal(flat, prev_flat):
            if evaluated is None or not np.array_equal(flat, evaluated):
                V = policy_values(arrays, flat, r, gamma)
                evaluated = flat
        prev_flat = flat
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps (eta={eta})")


def mixture_coefficient(c_minus: float, c_plus: float, c_target: float) -> float:
    """Weight on the over-budget policy so the mixed cost hits ``c_target``."""
    if c_minus == c_plus:
        return 1.0
    xi = (c_target - c_plus) / (c_minus - c_plus)
    return float(min(1.0, max(0.0, xi)))


@dataclass
class LagrangianSolution:
    eta_minus: float
    eta_plus: float
    policy_minus: Policy
    policy_plus: Policy
    xi: float
    metrics_minus: Metrics
    metrics_plus: Metrics
    mixed: Metrics
    trace: list[dict] = field(default_factory=list, repr=False)

    @property
    def mixed_age(self) -> float:
        return self.mixed.avg_age

    @property
    def mixed_power(self) -> float:
        return self.mixed.avg_total_power

    @property
    def mixed_cost(self) -> float:
        return self.mixed.avg_transmit_power

    @property
    def mixed_efficiency(self) -> float:
        return self.mixed.energy_efficiency

    def objective(self, omega: float) -> float:
        return self.mixed.objective(omega)

    def mixed_policy(self) -> MixedPolicy:
        return MixedPolicy(self.policy_minus, self.policy_plus, self.xi)


def solve_cmdp(
    model: ChannelModel,
    cfg: SystemConfig,
    accelerate: bool = True,
    monotone_tol: float = 1e-9,
) -> LagrangianSolution:
    """Bisection on the multiplier, then mix the two bracketing policies."""
    arrays = CMDPArrays(model, cfg)
    trace: list[dict] = []
    state = {"V": None}

    def solve_at(eta: float, eta_lo: float, eta_hi: float):
        res = value_iteration(eta, cfg.omega, model, cfg, V0=state["V"], accelerate=accelerate, arrays=arrays)
        state["V"] = res.values
        metrics, _ = evaluate_policy(res.policy, cfg, arrays=arrays)
        trace.append(
            dict(
                step=len(trace), eta=eta, eta_minus=eta_lo, eta_plus=eta_hi,
                sweeps=res.iterations, residual=res.residual,
                avg_transmit_power=metrics.avg_transmit_power,
            )
        )
        return res.policy, metrics

    pol0, met0 = solve_at(0.0, 0.0, float("nan"))
    if met0.avg_transmit_power <= cfg.c_max:
        return LagrangianSolution(0.0, 0.0, pol0, pol0, 1.0, met0, met0, met0, trace)

    eta_lo, pol_lo, met_lo = 0.0, pol0, met0
    eta_hi = 1.0
    pol_hi, met_hi = solve_at(eta_hi, eta_lo, eta_hi)
    while met_hi.avg_transmit_power > cfg.c_max:
        eta_hi *= 2.0
        if eta_hi > 1e12:
            raise ConvergenceError("could not find a multiplier meeting the power budget")
        pol_hi, met_hi = solve_at(eta_hi, eta_lo, eta_hi)

    while abs(eta_hi - eta_lo) > cfg.tol_eta:
        eta = 0.5 * (eta_lo + eta_hi)
        pol, met = solve_at(eta, eta_lo, eta_hi)
        if met.avg_transmit_power > cfg.c_max:
            eta_lo, pol_lo, met_lo = eta, pol, met
        else:
            eta_hi, pol_hi, met_hi = eta, pol, met

    _check_monotone(trace, monotone_tol)
    xi = mixture_coefficient(met_lo.avg_transmit_power, met_hi.avg_transmit_power, cfg.c_max)
    mixed = mix_metrics(met_lo, met_hi, xi)
    log.info(
        "solved: eta in [%.8g, %.8g], xi=%.6f, age=%.6f, C=%.6f",
        eta_lo, eta_hi, xi, mixed.avg_age, mixed.avg_transmit_power,
    )
    return LagrangianSolution(eta_lo, eta_hi, pol_lo, pol_hi, xi, met_lo, met_hi, mixed, trace)


def _check_monotone(trace: list[dict], tol: float) -> None:
    pts = sorted((t["eta"], t["avg_transmit_power"]) for t in trace)
    for (e1, c1), (e2, c2) in zip(pts, pts[1:]):
        if c2 > c1 + tol:
            raise MonotonicityError(
                f"average transmit power rose from {c1:.12g} (eta={e1:.8g}) to {c2:.12g} (eta={e2:.8g})"
            )


def write_trace_csv(solution: LagrangianSolution, path) -> None:
    cols = ["step", "eta", "eta_minus", "eta_plus", "sweeps", "residual", "avg_transmit_power"]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for row in solution.trace:
            w.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in cols})
