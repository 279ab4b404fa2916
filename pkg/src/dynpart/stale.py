"""Adaptive stale embedding aggregation with a last-transmitted cache.

A receiver may reuse a boundary vertex's previously transmitted embedding
when the current one moved less than a threshold. Comparisons are always
against the *last transmitted* copy, never the previous epoch's value, so the
gap between what receivers hold and the truth stays bounded by the threshold;
the previous-epoch variant (kept here only as a demonstration) lets errors
accumulate without bound under steady drift.

The per-epoch threshold scales the epoch's maximum observed distance by a
sigmoid of normalized training progress. Two adaptive variants ship because
the two natural sign conventions move the threshold in opposite directions:
``adaptive-tighten`` (sigmoid of +progress) shrinks the threshold as the loss
improves, ``adaptive-relax`` (sigmoid of -progress, the default) grows it so
a stabilizing model reuses more and transmits less.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Mapping, Sequence

import numpy as np

__all__ = [
    "StaleMode",
    "StaleConfig",
    "EpochLossTrace",
    "threshold",
    "EmbeddingCache",
    "TransmissionDecision",
    "filter_transmissions",
    "filter_transmissions_prev_epoch",
    "max_cache_gap",
    "DriftSpec",
    "DriftStream",
]


class StaleMode(str, Enum):
    OFF = "off"
    STATIC = "static"
    ADAPTIVE_TIGHTEN = "adaptive-tighten"  # verbatim sigmoid(+progress) form
    ADAPTIVE_RELAX = "adaptive-relax"  # sigmoid(-progress): reuse more as loss drops


@dataclass(frozen=True)
class StaleConfig:
    mode: StaleMode = StaleMode.OFF
    static_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mode", StaleMode(self.mode))
        if not 0.0 <= self.static_fraction <= 1.0:
            raise ValueError("static_fraction must be in [0, 1]")

    @classmethod
    def off(cls) -> "StaleConfig":
        return cls(StaleMode.OFF)

    @classmethod
    def static(cls, fraction: float) -> "StaleConfig":
        return cls(StaleMode.STATIC, fraction)

    @classmethod
    def adaptive(cls, tighten: bool = False) -> "StaleConfig":
        return cls(StaleMode.ADAPTIVE_TIGHTEN if tighten else StaleMode.ADAPTIVE_RELAX)


@dataclass
class EpochLossTrace:
    """Per-epoch training losses, first epoch first."""

    losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.losses and self.losses[0] <= 0:
            raise ValueError("initial loss must be > 0")

    def append(self, loss: float) -> None:
        if not self.losses and loss <= 0:
            raise ValueError("initial loss must be > 0")
        self.losses.append(loss)

    def progress(self, r: int) -> float:
        """Normalized loss decrease up to epoch r-1: (l1 - l_{r-1}) / l1."""
        if r < 2:
            raise ValueError("progress is defined from epoch 2 on")
        if len(self.losses) < r - 1:
            raise ValueError(f"no loss recorded for epoch {r - 1}")
        l1 = self.losses[0]
        return (l1 - self.losses[r - 2]) / l1


def threshold(trace: EpochLossTrace, r: int, d_r: float, config: StaleConfig) -> float:
    """Reuse threshold for epoch r given the epoch's max distance ``d_r``."""
    if d_r < 0:
        raise ValueError("d_r must be >= 0")
    if config.mode is StaleMode.OFF:
        return 0.0
    if config.mode is StaleMode.STATIC:
        return config.static_fraction * d_r
    p = trace.progress(r)
    if config.mode is StaleMode.ADAPTIVE_TIGHTEN:
        return d_r / (1.0 + math.exp(p))
    return d_r / (1.0 + math.exp(-p))


class EmbeddingCache:
    """Last-transmitted embedding per boundary vertex."""

    def __init__(self):
        self._store: dict[Hashable, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._store

    def get(self, key: Hashable) -> np.ndarray | None:
        return self._store.get(key)

    def put(self, key: Hashable, value: np.ndarray) -> None:
        self._store[key] = np.array(value, dtype=np.float64, copy=True)

    def keys(self):
        return self._store.keys()


@dataclass
class TransmissionDecision:
    send: list[Hashable]
    reuse: list[Hashable]
    d_r: float


def _distances(
    current: Mapping[Hashable, np.ndarray], cache: EmbeddingCache
) -> tuple[list[Hashable], np.ndarray, np.ndarray]:
    keys = sorted(current.keys())
    dist = np.zeros(len(keys))
    cached_mask = np.zeros(len(keys), dtype=bool)
    for i, k in enumerate(keys):
        old = cache.get(k)
        if old is not None:
            cached_mask[i] = True
            dist[i] = float(np.linalg.norm(np.asarray(current[k], dtype=np.float64) - old))
    return keys, dist, cached_mask


def filter_transmissions(
    current: Mapping[Hashable, np.ndarray],
    cache: EmbeddingCache,
    theta: float,
) -> TransmissionDecision:
    """Split boundary vertices into send/reuse sets against the cache.

    Vertices without a cached copy (first epoch) are always sent. A vertex is
    sent when its L2 distance to the cached copy strictly exceeds ``theta``;
    sent vertices refresh the cache. ``d_r`` is the maximum distance over the
    vertices that had a cached copy (0.0 when none did).
    """
    keys, dist, cached_mask = _distances(current, cache)
    d_r = float(dist[cached_mask].max()) if cached_mask.any() else 0.0
    send: list[Hashable] = []
    reuse: list[Hashable] = []
    for i, k in enumerate(keys):
        if not cached_mask[i] or dist[i] > theta:
            send.append(k)
            cache.put(k, current[k])
        else:
            reuse.append(k)
    return TransmissionDecision(send, reuse, d_r)


def filter_transmissions_prev_epoch(
    current: Mapping[Hashable, np.ndarray],
    prev_epoch: EmbeddingCache,
    transmitted: EmbeddingCache,
    theta: float,
) -> TransmissionDecision:
    """Demonstration-only alternative: compare against the previous epoch.

    The comparison basis is refreshed every epoch whether or not anything was
    sent, so under steady small drift nothing is ever transmitted while the
    receivers' copies (``transmitted``) fall arbitrarily far behind.
    """
    keys, dist, cached_mask = _distances(current, prev_epoch)
    d_r = float(dist[cached_mask].max()) if cached_mask.any() else 0.0
    send: list[Hashable] = []
    reuse: list[Hashable] = []
    for i, k in enumerate(keys):
        if not cached_mask[i] or dist[i] > theta:
            send.append(k)
            transmitted.put(k, current[k])
        else:
            reuse.append(k)
        prev_epoch.put(k, current[k])
    return TransmissionDecision(send, reuse, d_r)


def max_cache_gap(cache: EmbeddingCache, current: Mapping[Hashable, np.ndarray]) -> float:
    """Largest L2 gap between a cached embedding and its current true value."""
    gap = 0.0
    for k, vec in current.items():
        old = cache.get(k)
        if old is not None:
            gap = max(gap, float(np.linalg.norm(np.asarray(vec, dtype=np.float64) - old)))
    return gap


# -- synthetic embedding drift -----------------------------------------------------


@dataclass(frozen=True)
class DriftSpec:
    """Per-epoch embedding movement: most vertices move less than
    ``quiet_max``, a ``heavy_fraction`` moves in [heavy_min, heavy_max], and
    everything shrinks by ``decay`` each epoch."""

    dim: int = 8
    decay: float = 0.9
    quiet_max: float = 0.95
    heavy_min: float = 1.05
    heavy_max: float = 10.0
    heavy_fraction: float = 0.15

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        if not 0.0 <= self.heavy_fraction <= 1.0:
            raise ValueError("heavy_fraction must be in [0, 1]")
        if not 0.0 <= self.quiet_max or not self.heavy_min <= self.heavy_max:
            raise ValueError("bad drift magnitude bands")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "decay": self.decay,
            "quiet_max": self.quiet_max,
            "heavy_min": self.heavy_min,
            "heavy_max": self.heavy_max,
            "heavy_fraction": self.heavy_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriftSpec":
        return cls(**d)


class DriftStream:
    """Deterministic per-epoch embeddings for a fixed key set.

    Epoch 1 is a seeded random base; each later epoch adds a random-direction
    offset whose length is drawn from the spec's quiet/heavy bands and scaled
    by ``decay**(epoch - 2)``. Epochs must be consumed in order.
    """

    def __init__(self, keys: Sequence[Hashable], spec: DriftSpec, seed: int = 0):
        self.keys = list(keys)
        self.spec = spec
        self._rng = np.random.default_rng(seed)
        self._epoch = 0
        self._current: np.ndarray | None = None

    def epoch(self, r: int) -> np.ndarray:
        """(n_keys, dim) embeddings of epoch r; call with r = 1, 2, ..."""
        if r != self._epoch + 1:
            raise ValueError(f"epochs must be consumed in order, expected {self._epoch + 1}")
        n, dim = len(self.keys), self.spec.dim
        if r == 1:
            self._current = self._rng.normal(0.0, 1.0, size=(n, dim))
        else:
            direction = self._rng.normal(0.0, 1.0, size=(n, dim))
            norms = np.linalg.norm(direction, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            direction /= norms
            heavy = self._rng.random(n) < self.spec.heavy_fraction
            mag = self._rng.uniform(0.0, self.spec.quiet_max, size=n)
            mag[heavy] = self._rng.uniform(
                self.spec.heavy_min, self.spec.heavy_max, size=int(heavy.sum())
            )
            mag *= self.spec.decay ** (r - 2)
            self._current = self._current + direction * mag[:, None]
        self._epoch = r
        return self._current.copy()

    def as_mapping(self, values: np.ndarray) -> dict[Hashable, np.ndarray]:
        return {k: values[i] for i, k in enumerate(self.keys)}
