"""Run configuration: a nested YAML document mirrored by CLI flags.

Every pipeline stage reads the same config; unknown keys are rejected so
typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .costmodel import CostCoeffs, ModelProfile
from .fusion import MemCoeffs
from .graphstore import LengthDistribution, SyntheticSpec
from .sim import METHODS, ClusterSpec
from .stale import DriftSpec, StaleConfig, StaleMode

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    graph_path: str | None = None
    synthetic: SyntheticSpec | None = None
    profile: ModelProfile = field(default_factory=ModelProfile)
    cluster: ClusterSpec = field(default_factory=ClusterSpec)
    method: str = "pgc"
    size_cap: int | None = None
    max_rounds: int = 100
    stale: StaleConfig = field(default_factory=StaleConfig.off)
    drift: DriftSpec = field(default_factory=DriftSpec)
    cost: CostCoeffs = field(default_factory=CostCoeffs)
    memory: MemCoeffs = field(default_factory=MemCoeffs)
    epochs: int = 3
    initial_loss: float = 2.0
    loss_decay: float = 0.97
    predictor_path: str | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.graph_path is None and self.synthetic is None:
            raise ConfigError("config needs a graph: set graph.path or graph.synthetic")
        if self.graph_path is not None and not Path(self.graph_path).exists():
            raise ConfigError(f"graph file {self.graph_path!r} does not exist")
        if self.predictor_path is not None and not Path(self.predictor_path).exists():
            raise ConfigError(f"predictor file {self.predictor_path!r} does not exist")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.size_cap is not None and self.size_cap < 1:
            raise ConfigError("size_cap must be >= 1")


def _take(d: dict, key: str, default=None):
    return d.pop(key, default)


def _no_leftovers(d: dict, where: str) -> None:
    if d:
        raise ConfigError(f"unknown keys in {where}: {sorted(d)}")


def _parse_length_dist(d: dict) -> LengthDistribution:
    kind = _take(d, "kind", "uniform")
    if kind == "constant":
        out = LengthDistribution.constant(int(_take(d, "value", 1)))
    elif kind == "uniform":
        out = LengthDistribution.uniform(int(_take(d, "low", 1)), int(_take(d, "high", 8)))
    elif kind == "geometric":
        out = LengthDistribution.geometric(float(_take(d, "mean", 4.0)))
    else:
        raise ConfigError(f"unknown length distribution kind {kind!r}")
    _no_leftovers(d, "graph.synthetic.length_dist")
    return out


def _parse_synthetic(d: dict) -> SyntheticSpec:
    dist = _parse_length_dist(dict(_take(d, "length_dist", {}) or {}))
    try:
        spec = SyntheticSpec(
            total_vertices=int(_take(d, "total_vertices", 1000)),
            total_edges=int(_take(d, "total_edges", 500)),
            T=int(_take(d, "snapshots", 10)),
            edges_per_snapshot_mean=float(_take(d, "edges_mean", 50.0)),
            edges_per_snapshot_stddev=float(_take(d, "edges_stddev", 0.0)),
            presence_length_distribution=dist,
            rng_seed=int(_take(d, "seed", 0)),
            feature_dim=int(_take(d, "feature_dim", 2)),
        )
    except ValueError as exc:
        raise ConfigError(f"graph.synthetic: {exc}") from None
    _no_leftovers(d, "graph.synthetic")
    return spec


def _build(cls, d: dict, where: str):
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Load YAML config (optional) and apply flag overrides on top."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = yaml.safe_load(fh.read()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file {path!r} not found") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path!r}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a mapping")

    cfg = RunConfig()
    cfg.seed = int(_take(doc, "seed", cfg.seed))
    cfg.out_dir = str(_take(doc, "out", cfg.out_dir))

    graph = dict(_take(doc, "graph", {}) or {})
    gpath = _take(graph, "path", None)
    if gpath is not None:
        cfg.graph_path = str(gpath)
    syn = _take(graph, "synthetic", None)
    if syn is not None:
        cfg.synthetic = _parse_synthetic(dict(syn))
    _no_leftovers(graph, "graph")

    if "profile" in doc:
        cfg.profile = _build(ModelProfile, dict(_take(doc, "profile")), "profile")
    if "cluster" in doc:
        cfg.cluster = _build(ClusterSpec, dict(_take(doc, "cluster")), "cluster")

    part = dict(_take(doc, "partition", {}) or {})
    cfg.method = str(_take(part, "method", cfg.method))
    cap = _take(part, "size_cap", None)
    cfg.size_cap = int(cap) if cap is not None else None
    cfg.max_rounds = int(_take(part, "max_rounds", cfg.max_rounds))
    _no_leftovers(part, "partition")

    stale = dict(_take(doc, "stale", {}) or {})
    mode = _take(stale, "mode", "off")
    fraction = float(_take(stale, "static_fraction", 0.5))
    try:
        cfg.stale = StaleConfig(StaleMode(mode), fraction)
    except ValueError as exc:
        raise ConfigError(f"stale: {exc}") from None
    drift = _take(stale, "drift", None)
    if drift is not None:
        cfg.drift = _build(DriftSpec, dict(drift), "stale.drift")
    cfg.initial_loss = float(_take(stale, "initial_loss", cfg.initial_loss))
    cfg.loss_decay = float(_take(stale, "loss_decay", cfg.loss_decay))
    _no_leftovers(stale, "stale")

    if "cost" in doc:
        cfg.cost = _build(CostCoeffs, dict(_take(doc, "cost")), "cost")
    if "memory" in doc:
        cfg.memory = _build(MemCoeffs, dict(_take(doc, "memory")), "memory")

    sim = dict(_take(doc, "sim", {}) or {})
    cfg.epochs = int(_take(sim, "epochs", cfg.epochs))
    _no_leftovers(sim, "sim")

    pred = _take(doc, "predictor", None)
    if pred is not None:
        cfg.predictor_path = str(pred)

    _no_leftovers(doc, "config")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, value)

    cfg.validate()
    return cfg
