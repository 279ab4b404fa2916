"""Communication weights, analytic compute costs, and the MLP workload predictor.

All byte accounting flows from one place: ``edge_traffic`` gives the size of a
single embedding message over a spatial or temporal dependency, and
``MessageSet`` expands a graph + model profile into the full set of directed
messages an epoch exchanges. Undirected spatial edges carry one message per
direction. Temporal dependencies depend on the model's fanout: recurrent
encoders pass one message from each presence to the next, attention-style
encoders exchange messages between every pair of the same entity's instances.

Compute time has two providers with identical inputs: ``true_cost`` is the
deterministic analytic model the simulator treats as ground truth, and
``Predictor`` is a pair of 3x256 ReLU MLPs (structure time + time-encoder
time) trained on measured samples with a MAPE loss and Adam.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .graphstore import DynamicGraph

__all__ = [
    "TemporalFanout",
    "ModelProfile",
    "edge_traffic",
    "MessageSet",
    "ChunkStats",
    "CostCoeffs",
    "true_cost",
    "mape",
    "Predictor",
    "TrainingDivergedError",
    "train_predictor",
    "stats_features",
]


class TemporalFanout(str, Enum):
    PREVIOUS_ONLY = "previous-only"
    ALL_SNAPSHOTS = "all-snapshots"


@dataclass(frozen=True)
class ModelProfile:
    """Per-block message counts and embedding width of a DGNN architecture."""

    blocks: int = 1
    spatial_msgs_per_block: int = 2
    temporal_msgs_per_block: int = 1
    temporal_fanout: TemporalFanout = TemporalFanout.PREVIOUS_ONLY
    embedding_dim: int = 16
    bytes_per_scalar: int = 4

    def __post_init__(self):
        if self.blocks < 1 or self.spatial_msgs_per_block < 1:
            raise ValueError("blocks and spatial_msgs_per_block must be >= 1")
        if self.temporal_msgs_per_block < 0:
            raise ValueError("temporal_msgs_per_block must be >= 0")
        if self.embedding_dim < 1 or self.bytes_per_scalar < 1:
            raise ValueError("embedding_dim and bytes_per_scalar must be >= 1")
        object.__setattr__(self, "temporal_fanout", TemporalFanout(self.temporal_fanout))

    @classmethod
    def recurrent(cls, embedding_dim: int = 16) -> "ModelProfile":
        """GCN-stack + GRU style block: 2 spatial messages, 1 temporal, chained."""
        return cls(1, 2, 1, TemporalFanout.PREVIOUS_ONLY, embedding_dim, 4)

    @classmethod
    def attention(cls, embedding_dim: int = 16) -> "ModelProfile":
        """GAT + temporal-attention style block: all same-entity pairs talk."""
        return cls(1, 1, 1, TemporalFanout.ALL_SNAPSHOTS, embedding_dim, 4)

    def to_dict(self) -> dict:
        return {
            "blocks": self.blocks,
            "spatial_msgs_per_block": self.spatial_msgs_per_block,
            "temporal_msgs_per_block": self.temporal_msgs_per_block,
            "temporal_fanout": self.temporal_fanout.value,
            "embedding_dim": self.embedding_dim,
            "bytes_per_scalar": self.bytes_per_scalar,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelProfile":
        return cls(**d)


def edge_traffic(profile: ModelProfile, kind: str) -> int:
    """Bytes of one embedding message over one dependency of the given kind."""
    if kind == "spatial":
        msgs = profile.blocks * profile.spatial_msgs_per_block
    elif kind == "temporal":
        msgs = profile.blocks * profile.temporal_msgs_per_block
    else:
        raise ValueError(f"unknown edge kind {kind!r}")
    return msgs * profile.embedding_dim * profile.bytes_per_scalar


class MessageSet:
    """Directed embedding messages of one epoch for a graph + profile.

    ``src``/``dst`` are instance indices, ``nbytes`` the per-message size, and
    ``is_spatial`` the kind mask. Spatial edges appear once per direction;
    temporal messages follow the profile's fanout (consecutive-presence chain
    toward the later timestep, or every ordered same-entity pair). The arrays
    are the single source of truth for cut/internal traffic accounting.
    """

    def __init__(self, g: DynamicGraph, profile: ModelProfile):
        self.profile = profile
        ts = edge_traffic(profile, "spatial")
        tt = edge_traffic(profile, "temporal")

        se = g.spatial_edge_index()
        sp_src = np.concatenate([se[:, 0], se[:, 1]])
        sp_dst = np.concatenate([se[:, 1], se[:, 0]])

        if profile.temporal_fanout is TemporalFanout.PREVIOUS_ONLY:
            tl = g.temporal_link_index()
            tm_src, tm_dst = tl[:, 0], tl[:, 1]
        else:
            srcs, dsts = [], []
            for grp in g.entity_instance_groups():
                L = len(grp)
                iu, iv = np.triu_indices(L, k=1)
                srcs.append(grp[iu])
                dsts.append(grp[iv])
                srcs.append(grp[iv])
                dsts.append(grp[iu])
            if srcs:
                tm_src = np.concatenate(srcs)
                tm_dst = np.concatenate(dsts)
            else:
                tm_src = np.empty(0, dtype=np.int64)
                tm_dst = np.empty(0, dtype=np.int64)

        self.src = np.concatenate([sp_src, tm_src])
        self.dst = np.concatenate([sp_dst, tm_dst])
        self.nbytes = np.concatenate(
            [
                np.full(len(sp_src), ts, dtype=np.int64),
                np.full(len(tm_src), tt, dtype=np.int64),
            ]
        )
        self.is_spatial = np.concatenate(
            [np.ones(len(sp_src), dtype=bool), np.zeros(len(tm_src), dtype=bool)]
        )

    @property
    def total_bytes(self) -> int:
        return int(self.nbytes.sum())

    def cut_mask(self, device_of: np.ndarray, time_device_of: np.ndarray | None = None) -> np.ndarray:
        """Mask of messages crossing devices; temporal messages use the time-phase map."""
        tdev = device_of if time_device_of is None else time_device_of
        cut_sp = device_of[self.src] != device_of[self.dst]
        cut_tm = tdev[self.src] != tdev[self.dst]
        return np.where(self.is_spatial, cut_sp, cut_tm)


# -- analytic compute cost -----------------------------------------------------


@dataclass(frozen=True)
class ChunkStats:
    """Shape summary of a chunk, the input of both cost providers."""

    n_vertices: int
    n_edges: int
    total_sequence_length: int
    feature_dim: int
    layer_dims: tuple[int, ...] = (16,)

    def __post_init__(self):
        if min(self.n_vertices, self.n_edges, self.total_sequence_length, self.feature_dim) < 0:
            raise ValueError("chunk stats must be non-negative")
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))

    def to_dict(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "total_sequence_length": self.total_sequence_length,
            "feature_dim": self.feature_dim,
            "layer_dims": list(self.layer_dims),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChunkStats":
        return cls(
            d["n_vertices"],
            d["n_edges"],
            d["total_sequence_length"],
            d["feature_dim"],
            tuple(d["layer_dims"]),
        )


def stats_features(stats: ChunkStats) -> np.ndarray:
    """Predictor input: counts plus the layer-dimension list flattened to
    (depth, max width, total width)."""
    dims = stats.layer_dims or (0,)
    return np.array(
        [
            stats.n_vertices,
            stats.n_edges,
            stats.total_sequence_length,
            stats.feature_dim,
            len(dims),
            max(dims),
            sum(dims),
        ],
        dtype=np.float64,
    )


N_FEATURES = 7


@dataclass(frozen=True)
class CostCoeffs:
    """Calibration of the analytic cost model, in milliseconds.

    structure: alpha_edge * n_edges * feature_dim + alpha_vertex * n_vertices
    time:      beta_seq * total_sequence_length * sum(layer_dims) + beta_fixed
    """

    alpha_edge: float = 2e-5
    alpha_vertex: float = 1e-3
    beta_seq: float = 1e-4
    beta_fixed: float = 0.5

    def __post_init__(self):
        if min(self.alpha_edge, self.alpha_vertex, self.beta_seq, self.beta_fixed) <= 0:
            raise ValueError("cost coefficients must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "alpha_edge": self.alpha_edge,
            "alpha_vertex": self.alpha_vertex,
            "beta_seq": self.beta_seq,
            "beta_fixed": self.beta_fixed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostCoeffs":
        return cls(**d)


def true_cost(stats: ChunkStats, encoder: str, coeffs: CostCoeffs = CostCoeffs()) -> float:
    """Deterministic analytic execution-time estimate in ms for one encoder."""
    if encoder == "structure":
        return (
            coeffs.alpha_edge * stats.n_edges * stats.feature_dim
            + coeffs.alpha_vertex * stats.n_vertices
        )
    if encoder == "time":
        width = sum(stats.layer_dims)
        return coeffs.beta_seq * stats.total_sequence_length * width + coeffs.beta_fixed
    raise ValueError(f"unknown encoder {encoder!r}")


def total_true_cost(stats: ChunkStats, coeffs: CostCoeffs = CostCoeffs()) -> float:
    return true_cost(stats, "structure", coeffs) + true_cost(stats, "time", coeffs)


def mape(pairs: Iterable[tuple[float, float]]) -> float:
    """Mean absolute percentage error: mean over pairs of |pred - meas| / meas."""
    total = 0.0
    n = 0
    for predicted, measured in pairs:
        if measured <= 0:
            raise ValueError("measured values must be > 0 for MAPE")
        total += abs(predicted - measured) / measured
        n += 1
    if n == 0:
        raise ValueError("MAPE needs at least one pair")
    return total / n


# -- MLP workload predictor ------------------------------------------------------


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss."""


HIDDEN_LAYERS = 3
HIDDEN_UNITS = 256


class _Mlp:
    """Plain numpy MLP, float64, ReLU hidden activations, scalar linear output."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights
        self.biases = biases

    @classmethod
    def he_init(cls, n_in: int, rng: np.random.Generator) -> "_Mlp":
        sizes = [n_in] + [HIDDEN_UNITS] * HIDDEN_LAYERS + [1]
        ws, bs = [], []
        for a, b in zip(sizes, sizes[1:]):
            ws.append(rng.normal(0.0, math.sqrt(2.0 / a), size=(a, b)))
            bs.append(np.zeros(b))
        return cls(ws, bs)

    @classmethod
    def zeros(cls, n_in: int) -> "_Mlp":
        sizes = [n_in] + [HIDDEN_UNITS] * HIDDEN_LAYERS + [1]
        return cls(
            [np.zeros((a, b)) for a, b in zip(sizes, sizes[1:])],
            [np.zeros(b) for b in sizes[1:]],
        )

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output column, per-layer activations for backprop)."""
        acts = [x]
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h[:, 0], acts

    def backward(self, acts: list[np.ndarray], g_out: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of (loss) wrt each (W, b) given d loss / d output."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)  # type: ignore
        delta = g_out[:, None]
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = acts[i]
            grads[i] = (a_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
                delta = delta * (acts[i] > 0)
        return grads

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


class Predictor:
    """Two-tower workload predictor: structure-encoder ms + time-encoder ms.

    Inputs are standardized with training-set mean/std; targets are scaled by
    their training mean so the 256-wide towers train at O(1) magnitudes. The
    public prediction is the sum of the towers, clamped at zero.
    """

    VERSION = 1

    def __init__(
        self,
        structure_net: _Mlp,
        time_net: _Mlp,
        x_mean: np.ndarray,
        x_std: np.ndarray,
        y_scale: float,
        train_mape: float | None = None,
        val_mape: float | None = None,
    ):
        self.structure_net = structure_net
        self.time_net = time_net
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)
        self.y_scale = float(y_scale)
        self.train_mape = train_mape
        self.val_mape = val_mape

    @classmethod
    def zeros(cls) -> "Predictor":
        """All-zero weights: predicts 0 ms for every chunk (post-clamp)."""
        return cls(
            _Mlp.zeros(N_FEATURES),
            _Mlp.zeros(N_FEATURES),
            np.zeros(N_FEATURES),
            np.ones(N_FEATURES),
            1.0,
        )

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def _raw_output(self, Xn: np.ndarray) -> tuple[np.ndarray, list, list]:
        out_s, acts_s = self.structure_net.forward(Xn)
        out_t, acts_t = self.time_net.forward(Xn)
        return out_s + out_t, acts_s, acts_t

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        Xn = self._normalize(np.asarray(X, dtype=np.float64))
        raw, _, _ = self._raw_output(Xn)
        return np.maximum(raw * self.y_scale, 0.0)

    def predict(self, stats: ChunkStats) -> float:
        return float(self.predict_batch(stats_features(stats)[None, :])[0])

    def loss_and_grads(
        self, X: np.ndarray, y: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """MAPE loss on raw (unclamped) outputs plus gradients for all params.

        The absolute value's kink at predicted == measured uses subgradient 0.
        Parameter order matches ``params()``: structure tower then time tower,
        (W, b) alternating per layer.
        """
        Xn = self._normalize(np.asarray(X, dtype=np.float64))
        ys = np.asarray(y, dtype=np.float64) / self.y_scale
        raw, acts_s, acts_t = self._raw_output(Xn)
        resid = raw - ys
        loss = float(np.mean(np.abs(resid) / ys))
        g_out = np.sign(resid) / (ys * len(ys))
        grads_s = self.structure_net.backward(acts_s, g_out)
        grads_t = self.time_net.backward(acts_t, g_out)
        flat: list[np.ndarray] = []
        for gw, gb in grads_s:
            flat.extend([gw, gb])
        for gw, gb in grads_t:
            flat.extend([gw, gb])
        return loss, flat

    def params(self) -> list[np.ndarray]:
        return self.structure_net.params() + self.time_net.params()

    # -- persistence (versioned JSON weight file) --

    def save(self, path: str) -> None:
        doc = {
            "version": self.VERSION,
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_scale": self.y_scale,
            "train_mape": self.train_mape,
            "val_mape": self.val_mape,
            "structure": _mlp_to_lists(self.structure_net),
            "time": _mlp_to_lists(self.time_net),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Predictor":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != cls.VERSION:
            raise ValueError(f"unsupported predictor file version {doc.get('version')!r}")
        return cls(
            _mlp_from_lists(doc["structure"]),
            _mlp_from_lists(doc["time"]),
            np.asarray(doc["x_mean"]),
            np.asarray(doc["x_std"]),
            doc["y_scale"],
            doc.get("train_mape"),
            doc.get("val_mape"),
        )


def _mlp_to_lists(net: _Mlp) -> dict:
    return {
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _mlp_from_lists(d: dict) -> _Mlp:
    return _Mlp(
        [np.asarray(w, dtype=np.float64) for w in d["weights"]],
        [np.asarray(b, dtype=np.float64) for b in d["biases"]],
    )


class _Adam:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float | None = None) -> None:
        self.t += 1
        lr = self.lr if lr is None else lr
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def train_predictor(
    samples: Sequence[tuple[ChunkStats, float]],
    epochs: int = 100,
    seed: int = 0,
    lr: float = 1e-3,
    batch_size: int = 1024,
    val_fraction: float = 0.1,
) -> Predictor:
    """Train the two-tower predictor on (stats, measured ms) samples.

    Deterministic for a fixed seed. Raises ValueError on fewer than 100
    samples or non-positive measurements, TrainingDivergedError if the loss
    goes non-finite.
    """
    if len(samples) < 100:
        raise ValueError(f"need >= 100 samples, got {len(samples)}")
    X = np.stack([stats_features(s) for s, _ in samples])
    y = np.asarray([m for _, m in samples], dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("all measured times must be > 0")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    n_val = max(1, int(len(y) * val_fraction))
    X_val, y_val = X[:n_val], y[:n_val]
    X_tr, y_tr = X[n_val:], y[n_val:]

    x_mean = X_tr.mean(axis=0)
    x_std = X_tr.std(axis=0)
    x_std[x_std < 1e-12] = 1.0
    pred = Predictor(
        _Mlp.he_init(N_FEATURES, rng),
        _Mlp.he_init(N_FEATURES, rng),
        x_mean,
        x_std,
        float(y_tr.mean()),
    )
    params = pred.params()
    opt = _Adam(params, lr)

    n = len(y_tr)
    for epoch in range(epochs):
        # cosine decay to ~0 sharpens the late-epoch fit considerably
        lr_now = lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max(1, epochs)))
        perm = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = perm[lo : lo + batch_size]
            loss, grads = pred.loss_and_grads(X_tr[idx], y_tr[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}"
                )
            opt.step(params, grads, lr_now)

    pred.train_mape = float(
        np.mean(np.abs(pred.predict_batch(X_tr) - y_tr) / y_tr)
    )
    pred.val_mape = float(np.mean(np.abs(pred.predict_batch(X_val) - y_val) / y_val))
    return pred
