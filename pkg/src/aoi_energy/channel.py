"""Quantized block-fading channel.

The channel gain of every slot is drawn independently from a known fading
distribution.  The gain axis is cut into ``K`` bins by thresholds
``0 = z_0 < z_1 < ... < z_K = inf``; transmitting at level ``k`` uses the
smallest power that still decodes when the gain is at least ``z_k``.
Level ``K`` is the silent level (zero power, certain failure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class InvalidDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class FadingDistribution:
    """Distribution of the (power) channel gain.

    ``cdf`` and ``quantile`` must accept numpy arrays.
    """

    cdf: Callable[[np.ndarray], np.ndarray]
    quantile: Callable[[np.ndarray], np.ndarray]
    label: str


def exponential_gain(mean: float = 1.0) -> FadingDistribution:
    """Gain |h|^2 of Rayleigh fading, i.e. an exponential variable."""
    if not mean > 0:
        raise InvalidDistributionError("mean gain must be positive")

    def cdf(z):
        z = np.asarray(z, dtype=float)
        return np.where(z > 0, -np.expm1(-np.maximum(z, 0.0) / mean), 0.0)

    def quantile(u):
        return -mean * np.log1p(-np.asarray(u, dtype=float))

    label = "exponential_unit_mean" if mean == 1.0 else f"exponential_mean_{mean:g}"
    return FadingDistribution(cdf=cdf, quantile=quantile, label=label)


DISTRIBUTIONS: dict[str, Callable[[], FadingDistribution]] = {
    "exponential_unit_mean": exponential_gain,
    "rayleigh": exponential_gain,
}


def get_distribution(name: str) -> FadingDistribution:
    try:
        return DISTRIBUTIONS[name]()
    except KeyError:
        raise InvalidDistributionError(
            f"unknown channel distribution {name!r}; known: {sorted(DISTRIBUTIONS)}"
        ) from None


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Quantized channel: thresholds, bin probabilities, powers, failure probs.

    Arrays are indexed from 0 in numpy, so level ``k`` (1-based, as used in
    actions) lives at position ``k - 1`` of ``bin_probs``, ``powers`` and
    ``failure_probs``; ``thresholds`` has ``K + 1`` entries ``z_0..z_K``.
    """

    K: int
    rate: float
    thresholds: np.ndarray
    bin_probs: np.ndarray
    powers: np.ndarray
    failure_probs: np.ndarray
    dist: FadingDistribution = field(repr=False)

    def level_threshold(self, k: int) -> float:
        return float(self.thresholds[k])

    @property
    def silent_level(self) -> int:
        return self.K


def _build(dist, interior, rate, bin_probs, failure_probs) -> ChannelModel:
    K = len(interior) + 1
    z = np.concatenate(([0.0], np.asarray(interior, dtype=float), [np.inf]))
    powers = np.zeros(K)
    powers[: K - 1] = (2.0**rate - 1.0) / z[1:K]
    return ChannelModel(
        K=K,
        rate=float(rate),
        thresholds=_frozen(z),
        bin_probs=_frozen(bin_probs),
        powers=_frozen(powers),
        failure_probs=_frozen(failure_probs),
        dist=dist,
    )


def quantize_channel(dist: FadingDistribution, K: int, rate: float) -> ChannelModel:
    """Equiprobable quantization: ``z_k = quantile(k / K)``, every bin 1/K."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not rate > 0:
        raise ValueError("rate must be positive")
    u = np.arange(1, K) / K
    interior = np.asarray(dist.quantile(u), dtype=float)
    if not np.all(np.isfinite(interior)) or np.any(interior <= 0):
        raise InvalidDistributionError(
            f"{dist.label}: quantiles must be finite and positive below the top bin"
        )
    if np.any(np.diff(interior) <= 0):
        raise InvalidDistributionError(f"{dist.label}: quantiles not strictly increasing")
    bins = np.full(K, 1.0 / K)
    # k/K directly rather than a cumulative sum, so eps_k = k/K holds exactly
    eps = np.arange(1, K + 1) / K
    return _build(dist, interior, rate, bins, eps)


def quantize_with_thresholds(
    dist: FadingDistribution, thresholds, rate: float
) -> ChannelModel:
    """Quantize with caller-chosen interior thresholds ``z_1..z_{K-1}``.

    Bin probabilities come from the CDF: ``beta_i = F(z_i) - F(z_{i-1})``.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    interior = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if interior.size and (
        np.any(~np.isfinite(interior)) or interior[0] <= 0 or np.any(np.diff(interior) <= 0)
    ):
        raise ValueError("interior thresholds must be finite, positive and strictly increasing")
    F = np.asarray(dist.cdf(interior), dtype=float)
    cum = np.concatenate(([0.0], F, [1.0]))
    if np.any(np.diff(cum) < 0) or np.any(~np.isfinite(cum)):
        raise InvalidDistributionError(f"{dist.label}: cdf is not monotone on the thresholds")
    bins = np.diff(cum)
    eps = cum[1:]
    return _build(dist, interior, rate, bins, eps)


def failure_prob(model: ChannelModel, k: int) -> float:
    """Probability that a transmission at level ``k`` (1-based) fails."""
    if not 1 <= k <= model.K:
        raise IndexError(f"level {k} outside 1..{model.K}")
    return float(model.failure_probs[k - 1])


def dbw_to_watt(x: float) -> float:
    return 10.0 ** (x / 10.0)


def watt_to_dbw(w: float) -> float:
    if not w > 0:
        raise ValueError(f"power must be positive to express in dBW, got {w}")
    return 10.0 * math.log10(w)
