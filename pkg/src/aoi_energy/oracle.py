"""Exhaustive ground truth for tiny instances.

Every deterministic stationary policy is evaluated exactly through its
stationary distribution (undiscounted long-run averages).  The constrained
optimum over randomized policies is the lower convex hull of the achievable
``(transmit power, objective)`` points, read off at the budget.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .analysis import Metrics
from .channel import ChannelModel
from .cmdp import CMDPArrays, Policy, SystemConfig

DEFAULT_CAP = 10**7


class InstanceTooLargeError(ValueError):
    pass


class PolicyEvaluation(NamedTuple):
    policy_id: int
    metrics: Metrics
    objective: float


def _choices(arrays: CMDPArrays, prune: bool) -> list[np.ndarray]:
    """Candidate flattened actions per state.

    With ``prune`` an action is dropped when another action in the same state
    has the same successor law and no larger transmit power or sensing
    rate.  Such a swap leaves the chain unchanged and cannot raise cost or
    objective for any sensing power.
    """
    out = []
    for s in range(arrays.n_states):
        acts = np.arange(arrays.n_actions)
        if prune:
            keep = []
            key = lambda j: (  # noqa: E731
                arrays.fail_sa[s, j], arrays.ok_sa[s, j], arrays.action_eps[j]
            )
            for a in acts:
                dominated = False
                for b in acts:
                    if b == a or key(a) != key(b):
                        continue
                    cb, pb = arrays.transmit[s, b], arrays.generate_weight[s, b]
                    ca, pa = arrays.transmit[s, a], arrays.generate_weight[s, a]
                    if cb <= ca and pb <= pa and ((cb, pb) != (ca, pa) or b < a):
                        dominated = True
                        break
                if not dominated:
                    keep.append(a)
            acts = np.array(keep)
        out.append(acts)
    return out


def _count(choices) -> int:
    n = 1
    for c in choices:
        n *= len(c)
    return n


def _decode(choices, ids: np.ndarray) -> np.ndarray:
    """Mixed-radix decode of policy ids into flattened actions, shape (B, S)."""
    ids = np.asarray(ids, dtype=np.int64).copy()
    out = np.empty((ids.size, len(choices)), dtype=np.intp)
    for s, c in enumerate(choices):
        out[:, s] = c[ids % len(c)]
        ids //= len(c)
    return out


def enumerate_policies(
    model: ChannelModel, cfg: SystemConfig, cap: int = DEFAULT_CAP
) -> Iterator[Policy]:
    """Every deterministic policy exactly once."""
    arrays = CMDPArrays(model, cfg)
    choices = _choices(arrays, prune=False)
    total = _count(choices)
    if total > cap:
        raise InstanceTooLargeError(f"{total} policies exceed the enumeration cap {cap}")
    for start in range(0, total, 4096):
        for flat in _decode(choices, np.arange(start, min(total, start + 4096))):
            yield Policy.from_flat(arrays, flat, name="enumerated")


def _batch_stationary(arrays: CMDPArrays, flat: np.ndarray) -> np.ndarray:
    B, S = flat.shape
    eps = arrays.action_eps[flat]
    rows = np.broadcast_to(np.arange(S), (B, S))
    b_idx = np.broadcast_to(np.arange(B)[:, None], (B, S))
    P = np.zeros((B, S, S))
    P[b_idx, rows, arrays.fail_sa[rows, flat]] += eps
    P[b_idx, rows, arrays.ok_sa[rows, flat]] += 1.0 - eps
    A = np.swapaxes(P, 1, 2) - np.eye(S)
    A[:, -1, :] = 1.0
    rhs = np.zeros((B, S, 1))
    rhs[:, -1, 0] = 1.0
    return np.linalg.solve(A, rhs)[..., 0]


class Enumeration(NamedTuple):
    """Exact long-run averages of every candidate policy, indexed by policy id.

    ``age`` includes the half-slot term; total power is
    ``transmit + p_s * generation``.
    """

    choices: list
    transmit: np.ndarray
    generation: np.ndarray
    age: np.ndarray


def evaluate_all(
    model: ChannelModel,
    cfg: SystemConfig,
    cap: int = DEFAULT_CAP,
    prune: bool = True,
    chunk: int = 32768,
) -> Enumeration:
    arrays = CMDPArrays(model, cfg)
    choices = _choices(arrays, prune)
    total = _count(choices)
    if total > cap:
        raise InstanceTooLargeError(f"{total} policies exceed the enumeration cap {cap}")
    C = np.empty(total)
    G = np.empty(total)
    age = np.empty(total)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(total, start + chunk))
        flat = _decode(choices, ids)
        pi = _batch_stationary(arrays, flat)
        rows = np.arange(arrays.n_states)
        C[ids] = np.einsum("bs,bs->b", pi, arrays.transmit[rows, flat])
        G[ids] = np.einsum("bs,bs->b", pi, arrays.generate_weight[rows, flat])
        age[ids] = pi @ arrays.age + 0.5
    return Enumeration(choices, C, G, age)


def lower_hull_at(cost: np.ndarray, value: np.ndarray, budget: float, tol: float = 1e-12):
    """Best mixture of at most two points with mixed cost <= budget.

    Returns ``(value, i, j, xi)``: point ``i`` (weight ``xi``) is the
    over-budget end, ``j`` the within-budget end; ``i == j`` for a pure point.
    Returns ``None`` if no point is feasible.
    """
    cost = np.asarray(cost, dtype=float)
    value = np.asarray(value, dtype=float)
    if not np.any(cost <= budget + tol):
        return None
    order = np.lexsort((value, cost))
    # Pareto front: strictly improving value as cost increases
    run_min = np.minimum.accumulate(value[order])
    better = np.concatenate(([True], value[order][1:] < run_min[:-1]))
    front = order[better]
    hull: list[int] = []
    for k in front:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (cost[b] - cost[a]) * (value[k] - value[a]) - (value[b] - value[a]) * (cost[k] - cost[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(int(k))
    if budget + tol >= cost[hull[-1]]:
        j = hull[-1]
        return float(value[j]), j, j, 1.0
    for a, b in zip(hull, hull[1:]):
        if cost[a] <= budget + tol and budget < cost[b]:
            xi = (budget - cost[a]) / (cost[b] - cost[a])
            return float(xi * value[b] + (1 - xi) * value[a]), b, a, float(xi)
    j = hull[0]
    return float(value[j]), j, j, 1.0


@dataclass
class OracleResult:
    objective: float
    xi: float
    policy_minus: Policy
    policy_plus: Policy
    transmit_minus: float
    transmit_plus: float
    n_policies: int


def oracle_solve(
    model: ChannelModel,
    cfg: SystemConfig,
    c_max: float | None = None,
    cap: int = DEFAULT_CAP,
    prune: bool = True,
    evaluated: Enumeration | None = None,
) -> OracleResult:
    """Optimal objective over randomized policies meeting the power budget.

    ``evaluated`` may carry the output of :func:`evaluate_all` to reuse one
    enumeration across configs sharing the state space and channel.
    """
    budget = cfg.c_max if c_max is None else c_max
    choices, C, G, age = evaluated if evaluated is not None else evaluate_all(model, cfg, cap, prune)
    J = age + cfg.omega * (C + cfg.p_s * G)
    hit = lower_hull_at(C, J, budget)
    if hit is None:
        raise RuntimeError("no feasible policy")
    value, i, j, xi = hit
    arrays = CMDPArrays(model, cfg)
    flat = _decode(choices, np.array([i, j]))
    return OracleResult(
        objective=value,
        xi=xi,
        policy_minus=Policy.from_flat(arrays, flat[0], "oracle-minus"),
        policy_plus=Policy.from_flat(arrays, flat[1], "oracle-plus"),
        transmit_minus=float(C[i]),
        transmit_plus=float(C[j]),
        n_policies=len(C),
    )
