"""Constrained MDP for age/power scheduling over the quantized channel.

A state is ``(age, round)``: the current age of information and the index of
the transmission round about to be used for the packet in hand.  An action is
``(kind, level)`` where ``kind`` is ``"r"`` (retransmit the packet in hand) or
``"g"`` (sense and send a fresh packet) and ``level`` picks the transmit power.
Ages beyond ``delta_max`` wrap to state ``(1, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ChannelModel

RETRANSMIT = "r"
GENERATE = "g"
KINDS = (RETRANSMIT, GENERATE)
# "wrap": an age beyond delta_max restarts at (1, 1); "saturate": it stays at delta_max
OVERFLOW_MODES = ("wrap", "saturate")


class ConfigError(ValueError):
    """Invalid configuration; ``keys`` names the offending settings."""

    def __init__(self, message: str, keys: tuple[str, ...] = ()):
        super().__init__(message)
        self.keys = keys


class State(NamedTuple):
    age: int
    round: int


class Action(NamedTuple):
    kind: str
    level: int


class SlotCost(NamedTuple):
    total: float
    transmit: float


@dataclass(frozen=True)
class SystemConfig:
    """Problem and solver parameters.  Powers are in watts.

    The sensing power is ``alpha * c_max`` unless ``sensing_power`` is set.
    """

    M: int = 4
    delta_max: int = 100
    c_max: float = 10 ** (-0.3)
    alpha: float = 0.5
    omega: float = 1.0
    gamma: float = 0.999
    rate: float = 1.0
    tol_eta: float = 1e-6
    tol_v: float = 1e-9
    max_iter: int = 1_000_000
    sensing_power: float | None = None
    charge_sensing_on_discard: bool = False
    overflow: str = "wrap"

    def __post_init__(self):
        if self.overflow not in OVERFLOW_MODES:
            raise ConfigError(f"overflow must be one of {OVERFLOW_MODES}", ("overflow",))
        if self.M < 1:
            raise ConfigError("M must be >= 1", ("M",))
        if self.delta_max < self.M:
            raise ConfigError(
                f"delta_max ({self.delta_max}) must be >= M ({self.M})", ("delta_max", "M")
            )
        if not self.c_max > 0:
            raise ConfigError("c_max must be positive", ("c_max",))
        if not self.omega > 0:
            raise ConfigError("omega must be positive", ("omega",))
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)", ("gamma",))
        if not self.rate > 0:
            raise ConfigError("rate must be positive", ("rate",))
        if not (self.tol_eta > 0 and self.tol_v > 0):
            raise ConfigError("tolerances must be positive", ("tol_eta", "tol_v"))
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative", ("alpha",))
        if self.sensing_power is not None and self.sensing_power < 0:
            raise ConfigError("sensing_power must be non-negative", ("sensing_power",))

    @property
    def p_s(self) -> float:
        if self.sensing_power is not None:
            return float(self.sensing_power)
        return self.alpha * self.c_max


def build_state_space(M: int, delta_max: int) -> list[State]:
    """All ``(age, round)`` with ``round <= min(age, M)``, age-major."""
    if M < 1 or delta_max < M:
        raise ConfigError(
            f"need delta_max >= M >= 1, got M={M}, delta_max={delta_max}", ("delta_max", "M")
        )
    return [State(d, m) for d in range(1, delta_max + 1) for m in range(1, min(d, M) + 1)]


def _successors(s: State, kind: str, M: int, delta_max: int, overflow: str = "wrap") -> tuple[State, State]:
    """(failure successor, success successor) before merging."""
    d, m = s
    if kind == RETRANSMIT:
        fail = State(d + 1, m + 1) if m < M else State(d + 1, 1)
        ok = State(m, 1)
    else:
        fail = State(d + 1, 2)
        ok = State(1, 1)
    if fail.age > delta_max:
        fail = State(1, 1) if overflow == "wrap" else State(delta_max, fail.round)
    if M == 1 and fail.round > 1:
        # with a single round allowed a failed packet is always discarded
        fail = State(fail.age, 1)
    return fail, ok


def transitions(s: State, a: Action, model: ChannelModel, cfg: SystemConfig) -> dict[State, float]:
    """Successor distribution of ``s`` under ``a`` (zero-probability entries dropped)."""
    eps = float(model.failure_probs[a.level - 1])
    fail, ok = _successors(s, a.kind, cfg.M, cfg.delta_max, cfg.overflow)
    out: dict[State, float] = {}
    if eps > 0:
        out[fail] = eps
    if eps < 1:
        out[ok] = out.get(ok, 0.0) + (1.0 - eps)
    return out


def slot_cost(a: Action, model: ChannelModel, cfg: SystemConfig, state: State | None = None) -> SlotCost:
    c = float(model.powers[a.level - 1])
    p = c + (cfg.p_s if a.kind == GENERATE else 0.0)
    if cfg.charge_sensing_on_discard and a.kind == RETRANSMIT and state is not None and state.round == cfg.M:
        p += cfg.p_s * float(model.failure_probs[a.level - 1])
    return SlotCost(p, c)


def lagrangian_reward(
    s: State, a: Action, omega: float, eta: float, model: ChannelModel, cfg: SystemConfig
) -> float:
    cost = slot_cost(a, model, cfg, s)
    return s.age + 0.5 + omega * cost.total + eta * cost.transmit


class CMDPArrays:
    """Dense tables of the CMDP used by the vectorized solver and analysis.

    Actions are flattened as ``j = kind_index * K + (level - 1)`` with
    ``kind_index`` 0 for ``r`` and 1 for ``g``.
    """

    def __init__(self, model: ChannelModel, cfg: SystemConfig):
        self.model = model
        self.cfg = cfg
        self.states = build_state_space(cfg.M, cfg.delta_max)
        self.index = {s: i for i, s in enumerate(self.states)}
        S, K = len(self.states), model.K
        self.n_states, self.n_actions = S, 2 * K
        self.age = np.array([s.age for s in self.states], dtype=float)
        self.rounds = np.array([s.round for s in self.states], dtype=int)

        fail = np.empty((S, 2), dtype=np.intp)
        ok = np.empty((S, 2), dtype=np.intp)
        for i, s in enumerate(self.states):
            for j, kind in enumerate(KINDS):
                f, o = _successors(s, kind, cfg.M, cfg.delta_max, cfg.overflow)
                fail[i, j], ok[i, j] = self.index[f], self.index[o]
        self.fail_next, self.ok_next = fail, ok

        eps = np.asarray(model.failure_probs, dtype=float)
        self.eps = eps
        self.action_eps = np.concatenate([eps, eps])
        self.action_kind = np.repeat([0, 1], K)
        self.action_level = np.tile(np.arange(1, K + 1), 2)
        # per-(state, action) successor indices on the flattened action axis
        self.fail_sa = fail[:, self.action_kind]
        self.ok_sa = ok[:, self.action_kind]

        c = np.tile(np.asarray(model.powers, dtype=float), 2)
        self.transmit = np.broadcast_to(c, (S, 2 * K)).copy()
        total = self.transmit + cfg.p_s * self.action_kind[None, :]
        if cfg.charge_sensing_on_discard:
            at_cap = (self.rounds == cfg.M)[:, None] & (self.action_kind == 0)[None, :]
            total = total + np.where(at_cap, cfg.p_s * self.action_eps[None, :], 0.0)
        self.total = total
        self.generate_weight = np.broadcast_to(self.action_kind.astype(float), (S, 2 * K)).copy()
        if cfg.charge_sensing_on_discard:
            self.generate_weight += np.where(at_cap, self.action_eps[None, :], 0.0)

        # tie-break rank: lower total power, then r before g, then lower level
        rank = np.empty((S, 2 * K), dtype=np.intp)
        for i in range(S):
            order = np.lexsort((self.action_level, self.action_kind, self.total[i]))
            rank[i, order] = np.arange(2 * K)
        self.tie_rank = rank

    def action_index(self, a: Action) -> int:
        return KINDS.index(a.kind) * self.model.K + a.level - 1

    def action_of(self, j: int) -> Action:
        return Action(KINDS[int(self.action_kind[j])], int(self.action_level[j]))

    def policy_matrix(self, actions: np.ndarray) -> np.ndarray:
        """Row-stochastic matrix of the chain induced by flattened ``actions``."""
        S = self.n_states
        rows = np.arange(S)
        eps = self.action_eps[actions]
        P = np.zeros((S, S))
        P[rows, self.fail_sa[rows, actions]] += eps
        P[rows, self.ok_sa[rows, actions]] += 1.0 - eps
        return P


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic stationary policy over the truncated state space.

    ``kinds`` holds 0/1 for r/g and ``levels`` the 1-based power levels of
    ``model``, both ordered like :func:`build_state_space`.
    """

    model: ChannelModel
    M: int
    delta_max: int
    kinds: np.ndarray
    levels: np.ndarray
    name: str = "policy"

    def __post_init__(self):
        n = len(build_state_space(self.M, self.delta_max))
        if self.kinds.shape != (n,) or self.levels.shape != (n,):
            raise ValueError(f"policy arrays must have length {n}")
        if np.any((self.levels < 1) | (self.levels > self.model.K)):
            raise ValueError("policy level outside the channel's levels")

    @classmethod
    def from_actions(cls, model, M, delta_max, actions, name="policy") -> "Policy":
        states = build_state_space(M, delta_max)
        if isinstance(actions, dict):
            actions = [actions[s] for s in states]
        kinds = np.array([KINDS.index(a.kind) for a in actions], dtype=np.int8)
        levels = np.array([a.level for a in actions], dtype=np.int64)
        return cls(model, M, delta_max, kinds, levels, name)

    @classmethod
    def from_flat(cls, arrays: CMDPArrays, flat: np.ndarray, name="policy") -> "Policy":
        flat = np.asarray(flat)
        return cls(
            arrays.model,
            arrays.cfg.M,
            arrays.cfg.delta_max,
            arrays.action_kind[flat].astype(np.int8),
            arrays.action_level[flat].astype(np.int64),
            name,
        )

    @property
    def states(self) -> list[State]:
        return build_state_space(self.M, self.delta_max)

    def flat(self) -> np.ndarray:
        return self.kinds.astype(np.intp) * self.model.K + self.levels.astype(np.intp) - 1

    def action(self, s: State) -> Action:
        i = self.states.index(s)
        return Action(KINDS[self.kinds[i]], int(self.levels[i]))

    def as_dict(self) -> dict[State, Action]:
        return {
            s: Action(KINDS[k], int(lv)) for s, k, lv in zip(self.states, self.kinds, self.levels)
        }

    def transmit_powers(self) -> np.ndarray:
        return np.asarray(self.model.powers)[self.levels - 1]

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return (
            self.M == other.M
            and self.delta_max == other.delta_max
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.model.powers, other.model.powers)
        )

    __hash__ = None


@dataclass(frozen=True)
class MixedPolicy:
    """Randomization between two deterministic policies: ``minus`` with weight ``xi``."""

    minus: Policy
    plus: Policy
    xi: float

    def __post_init__(self):
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
