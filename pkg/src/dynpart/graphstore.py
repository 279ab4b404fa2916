"""Dynamic-graph storage: snapshot data model, file I/O, synthetic generation.

A dynamic graph is an ordered sequence of T snapshots. Each snapshot lists
the entities present at that timestep plus undirected edges between present
entities. An entity appearing at several timesteps yields one vertex-instance
per timestep; consecutive presences of the same entity are linked temporally.
Temporal links span presence gaps: an entity present at t=1 and t=3 only gets
the single link (1, 3).

File format (``.dg``, one record per line, ``#`` starts a comment):

    dg <T> <feature_dim>     header, required first record
    v <entity> <t>           presence of an entity at a 1-based timestep
    e <t> <u> <v>            undirected edge between entities u, v at t

Vertex features are never materialized here; the graph only records their
width (``feature_dim``), which is all the downstream byte accounting needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "GraphFormatError",
    "UnknownVertexError",
    "InfeasibleSpecError",
    "VertexInstance",
    "DynamicGraph",
    "LengthDistribution",
    "SyntheticSpec",
    "load_graph",
    "parse_graph",
    "save_graph",
    "format_graph",
    "generate",
]


class GraphFormatError(ValueError):
    """A graph file or constructor input is malformed."""


class UnknownVertexError(KeyError):
    """A queried vertex-instance is not part of the graph."""


class InfeasibleSpecError(ValueError):
    """A synthetic spec asks for more edges than its snapshots can hold."""


class VertexInstance(NamedTuple):
    """One entity's presence at one 1-based timestep."""

    entity: int
    t: int


class DynamicGraph:
    """Immutable snapshot sequence with derived temporal links.

    Construction validates all invariants (unique presences, edges between
    present same-snapshot entities); afterwards the object is read-only and
    safe to share across threads. Vertex-instances are globally ordered
    snapshot-major, entity-ascending inside each snapshot; ``index_of`` maps
    an instance to its position in that order.
    """

    def __init__(
        self,
        T: int,
        feature_dim: int,
        presences: Iterable[tuple[int, int]],
        edges: Iterable[tuple[int, int, int]] = (),
    ):
        if T < 0:
            raise GraphFormatError("snapshot count must be >= 0")
        if feature_dim < 0:
            raise GraphFormatError("feature_dim must be >= 0")
        self.T = int(T)
        self.feature_dim = int(feature_dim)

        vert_sets: list[set[int]] = [set() for _ in range(self.T)]
        for entity, t in presences:
            self._check_timestep(t)
            if entity < 0:
                raise GraphFormatError(f"entity ids must be non-negative, got {entity}")
            if entity in vert_sets[t - 1]:
                raise GraphFormatError(f"duplicate vertex-instance ({entity}, {t})")
            vert_sets[t - 1].add(entity)

        edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(self.T)]
        for t, u, v in edges:
            self._check_timestep(t)
            if u == v:
                raise GraphFormatError(f"self-loop on entity {u} at t={t}")
            if u not in vert_sets[t - 1] or v not in vert_sets[t - 1]:
                raise GraphFormatError(
                    f"edge ({u}, {v}) at t={t} references an absent vertex-instance"
                )
            edge_sets[t - 1].add((min(u, v), max(u, v)))

        self._vert_sets = vert_sets
        self._verts: list[list[int]] = [sorted(s) for s in vert_sets]
        self._edges: list[list[tuple[int, int]]] = [sorted(s) for s in edge_sets]

        presence: dict[int, list[int]] = {}
        instances: list[VertexInstance] = []
        index: dict[VertexInstance, int] = {}
        for t0, vs in enumerate(self._verts, start=1):
            for e in vs:
                presence.setdefault(e, []).append(t0)
                vi = VertexInstance(e, t0)
                index[vi] = len(instances)
                instances.append(vi)
        self._presence = presence
        self._instances = tuple(instances)
        self._index = index
        self._spatial_adj: list[dict[int, set[int]]] | None = None

    def _check_timestep(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise GraphFormatError(f"timestep {t} outside [1, {self.T}]")

    # -- basic accessors ---------------------------------------------------

    @property
    def n_instances(self) -> int:
        return len(self._instances)

    @property
    def n_entities(self) -> int:
        return len(self._presence)

    @property
    def n_spatial_edges(self) -> int:
        return sum(len(es) for es in self._edges)

    @property
    def instances(self) -> tuple[VertexInstance, ...]:
        return self._instances

    def vertices_at(self, t: int) -> list[int]:
        self._check_timestep(t)
        return list(self._verts[t - 1])

    def edges_at(self, t: int) -> list[tuple[int, int]]:
        self._check_timestep(t)
        return list(self._edges[t - 1])

    def entities(self) -> list[int]:
        return sorted(self._presence)

    def presence_of(self, entity: int) -> list[int]:
        """Sorted timesteps at which the entity exists; empty if unknown."""
        return list(self._presence.get(entity, ()))

    def __contains__(self, v: VertexInstance) -> bool:
        return v in self._index

    def index_of(self, v: VertexInstance) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise UnknownVertexError(f"vertex-instance {v} not in graph") from None

    @property
    def temporal_links(self) -> list[tuple[VertexInstance, VertexInstance]]:
        """Consecutive-presence links per entity, earlier instance first."""
        links = []
        for e in sorted(self._presence):
            ts = self._presence[e]
            for a, b in zip(ts, ts[1:]):
                links.append((VertexInstance(e, a), VertexInstance(e, b)))
        return links

    # -- neighborhood queries ----------------------------------------------

    def _adjacency(self) -> list[dict[int, set[int]]]:
        if self._spatial_adj is None:
            adj: list[dict[int, set[int]]] = [dict() for _ in range(self.T)]
            for t0, es in enumerate(self._edges):
                a = adj[t0]
                for u, v in es:
                    a.setdefault(u, set()).add(v)
                    a.setdefault(v, set()).add(u)
            self._spatial_adj = adj
        return self._spatial_adj

    def neighbors_spatial(self, v: VertexInstance) -> set[VertexInstance]:
        """Same-snapshot edge-adjacent instances of ``v``."""
        self.index_of(v)
        nbrs = self._adjacency()[v.t - 1].get(v.entity, ())
        return {VertexInstance(e, v.t) for e in nbrs}

    def neighbors_temporal(self, v: VertexInstance) -> set[VertexInstance]:
        """All other instances of ``v``'s entity, regardless of distance."""
        self.index_of(v)
        return {
            VertexInstance(v.entity, t) for t in self._presence[v.entity] if t != v.t
        }

    # -- numeric views (cached) ----------------------------------------------

    def spatial_edge_index(self) -> np.ndarray:
        """(E, 2) int64 array of instance indices, one row per undirected edge."""
        rows = [
            (self._index[VertexInstance(u, t0 + 1)], self._index[VertexInstance(v, t0 + 1)])
            for t0, es in enumerate(self._edges)
            for u, v in es
        ]
        return np.asarray(rows, dtype=np.int64).reshape(-1, 2)

    def temporal_link_index(self) -> np.ndarray:
        """(L, 2) int64 array of instance indices, earlier presence first."""
        rows = [(self._index[a], self._index[b]) for a, b in self.temporal_links]
        return np.asarray(rows, dtype=np.int64).reshape(-1, 2)

    def entity_instance_groups(self) -> list[np.ndarray]:
        """Per entity (with >= 2 presences) the instance indices in time order."""
        groups = []
        for e in sorted(self._presence):
            ts = self._presence[e]
            if len(ts) < 2:
                continue
            groups.append(
                np.asarray([self._index[VertexInstance(e, t)] for t in ts], dtype=np.int64)
            )
        return groups


# -- file I/O ----------------------------------------------------------------


def parse_graph(text: str) -> DynamicGraph:
    """Parse the edge-list text format; errors carry the offending line number."""
    header: tuple[int, int] | None = None
    presences: list[tuple[int, int]] = []
    edges: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "dg":
                if header is not None:
                    raise GraphFormatError("duplicate header")
                if len(parts) != 3:
                    raise GraphFormatError("header needs 'dg <T> <feature_dim>'")
                header = (int(parts[1]), int(parts[2]))
            elif parts[0] == "v":
                if len(parts) != 3:
                    raise GraphFormatError("presence needs 'v <entity> <t>'")
                if header is None:
                    raise GraphFormatError("record before 'dg' header")
                presences.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "e":
                if len(parts) != 4:
                    raise GraphFormatError("edge needs 'e <t> <u> <v>'")
                if header is None:
                    raise GraphFormatError("record before 'dg' header")
                edges.append((int(parts[1]), int(parts[2]), int(parts[3])))
            else:
                raise GraphFormatError(f"unknown record type {parts[0]!r}")
        except (GraphFormatError, ValueError) as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    if header is None:
        raise GraphFormatError("missing 'dg <T> <feature_dim>' header")
    try:
        return DynamicGraph(header[0], header[1], presences, edges)
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc)) from None


def load_graph(path: str, format: str = "edge-list") -> DynamicGraph:
    if format != "edge-list":
        raise GraphFormatError(f"unsupported graph format {format!r}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


def format_graph(g: DynamicGraph) -> str:
    """Serialize in canonical order (snapshot-major, ids ascending)."""
    out = [f"dg {g.T} {g.feature_dim}"]
    for t in range(1, g.T + 1):
        for e in g.vertices_at(t):
            out.append(f"v {e} {t}")
    for t in range(1, g.T + 1):
        for u, v in g.edges_at(t):
            out.append(f"e {t} {u} {v}")
    return "\n".join(out) + "\n"


def save_graph(g: DynamicGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g))


# -- synthetic generation ------------------------------------------------------


@dataclass(frozen=True)
class LengthDistribution:
    """Distribution over entity presence lengths (clamped to [1, T]).

    kinds: ``constant`` (always ``value``), ``uniform`` (integers in
    [low, high]), ``geometric`` (mean ``mean``, heavy short-sequence skew),
    ``bimodal`` (mostly uniform [low, high], a ``long_fraction`` of entities
    uniform [long_low, long_high] -- the short-lived-majority, long-lived-tail
    shape real dynamic graphs show).
    """

    kind: str = "uniform"
    value: int = 1
    low: int = 1
    high: int = 1
    mean: float = 4.0
    long_low: int = 1
    long_high: int = 1
    long_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "uniform", "geometric", "bimodal"):
            raise ValueError(f"unknown length distribution kind {self.kind!r}")
        if self.kind in ("uniform", "bimodal") and not 1 <= self.low <= self.high:
            raise ValueError("uniform length bounds need 1 <= low <= high")
        if self.kind == "constant" and self.value < 1:
            raise ValueError("constant length must be >= 1")
        if self.kind == "geometric" and self.mean < 1.0:
            raise ValueError("geometric mean length must be >= 1")
        if self.kind == "bimodal":
            if not 1 <= self.long_low <= self.long_high:
                raise ValueError("bimodal long bounds need 1 <= long_low <= long_high")
            if not 0.0 <= self.long_fraction <= 1.0:
                raise ValueError("long_fraction must be in [0, 1]")

    @classmethod
    def constant(cls, value: int) -> "LengthDistribution":
        return cls(kind="constant", value=value)

    @classmethod
    def uniform(cls, low: int, high: int) -> "LengthDistribution":
        return cls(kind="uniform", low=low, high=high)

    @classmethod
    def geometric(cls, mean: float) -> "LengthDistribution":
        return cls(kind="geometric", mean=mean)

    @classmethod
    def bimodal(
        cls, low: int, high: int, long_low: int, long_high: int, long_fraction: float
    ) -> "LengthDistribution":
        return cls(
            kind="bimodal",
            low=low,
            high=high,
            long_low=long_low,
            long_high=long_high,
            long_fraction=long_fraction,
        )

    def sample(self, rng: np.random.Generator, size: int, t_max: int) -> np.ndarray:
        if self.kind == "constant":
            out = np.full(size, self.value, dtype=np.int64)
        elif self.kind == "uniform":
            out = rng.integers(self.low, self.high + 1, size=size, dtype=np.int64)
        elif self.kind == "bimodal":
            out = rng.integers(self.low, self.high + 1, size=size, dtype=np.int64)
            is_long = rng.random(size) < self.long_fraction
            n_long = int(is_long.sum())
            if n_long:
                out[is_long] = rng.integers(
                    self.long_low, self.long_high + 1, size=n_long, dtype=np.int64
                )
        else:
            out = rng.geometric(1.0 / self.mean, size=size).astype(np.int64)
        return np.clip(out, 1, t_max)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the non-uniform synthetic graph generator.

    ``total_vertices`` counts vertex-instances (the sum of per-snapshot vertex
    counts). Per-snapshot edge counts are drawn from a clamped normal with the
    given mean and stddev, then renormalized so they sum to ``total_edges``.
    ``edge_attachment`` picks endpoints uniformly or proportional to current
    within-snapshot degree (hub-forming, the power-law shape real graphs show).
    """

    total_vertices: int
    total_edges: int
    T: int
    edges_per_snapshot_mean: float
    edges_per_snapshot_stddev: float
    presence_length_distribution: LengthDistribution = field(
        default_factory=lambda: LengthDistribution.uniform(1, 8)
    )
    rng_seed: int = 0
    feature_dim: int = 2
    edge_attachment: str = "uniform"

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.total_vertices < 1:
            raise ValueError("total_vertices must be >= 1")
        if self.total_edges < 0:
            raise ValueError("total_edges must be >= 0")
        if self.edges_per_snapshot_mean <= 0:
            raise ValueError("edges_per_snapshot_mean must be > 0")
        if self.edges_per_snapshot_stddev < 0:
            raise ValueError("edges_per_snapshot_stddev must be >= 0")
        if self.edge_attachment not in ("uniform", "preferential"):
            raise ValueError("edge_attachment must be 'uniform' or 'preferential'")

    @classmethod
    def reference(cls, stddev: float = 5000.0, rng_seed: int = 0) -> "SyntheticSpec":
        """Large-scale benchmark configuration: 5M instances, 2M edges, 100
        snapshots, 20K mean edges per snapshot."""
        return cls(
            total_vertices=5_000_000,
            total_edges=2_000_000,
            T=100,
            edges_per_snapshot_mean=20_000.0,
            edges_per_snapshot_stddev=stddev,
            presence_length_distribution=LengthDistribution.geometric(8.0),
            rng_seed=rng_seed,
        )


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer counts proportional to ``weights`` summing exactly to ``total``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones_like(w)
    quota = w * (total / w.sum())
    base = np.floor(quota).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(quota - base), kind="stable")
        base[order[:short]] += 1
    return base


def _sample_distinct_pairs(
    rng: np.random.Generator, n: int, k: int
) -> list[tuple[int, int]]:
    """k distinct unordered index pairs from range(n), uniform."""
    max_pairs = n * (n - 1) // 2
    if k > max_pairs:
        raise InfeasibleSpecError(f"{k} edges requested but only {max_pairs} possible")
    if k == 0:
        return []
    if k * 2 >= max_pairs:
        all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        idx = rng.choice(max_pairs, size=k, replace=False)
        return [all_pairs[i] for i in sorted(idx)]
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < k:
        m = 2 * (k - len(chosen)) + 8
        a = rng.integers(0, n, size=m)
        b = rng.integers(0, n, size=m)
        for u, v in zip(a.tolist(), b.tolist()):
            if u == v:
                continue
            chosen.add((min(u, v), max(u, v)))
            if len(chosen) == k:
                break
    return sorted(chosen)


def _sample_preferential_pairs(
    rng: np.random.Generator, n: int, k: int
) -> list[tuple[int, int]]:
    """k distinct unordered pairs with endpoints drawn proportional to
    (within-snapshot degree + 1), in batched rounds so hubs emerge."""
    max_pairs = n * (n - 1) // 2
    if k > max_pairs:
        raise InfeasibleSpecError(f"{k} edges requested but only {max_pairs} possible")
    if k == 0:
        return []
    deg = np.ones(n, dtype=np.float64)  # degree + 1 smoothing
    chosen: set[tuple[int, int]] = set()
    stall = 0
    while len(chosen) < k:
        m = 2 * (k - len(chosen)) + 8
        p = deg / deg.sum()
        a = rng.choice(n, size=m, p=p)
        b = rng.choice(n, size=m, p=p)
        added = 0
        for u, v in zip(a.tolist(), b.tolist()):
            if u == v:
                continue
            pair = (min(u, v), max(u, v))
            if pair in chosen:
                continue
            chosen.add(pair)
            deg[u] += 1.0
            deg[v] += 1.0
            added += 1
            if len(chosen) == k:
                break
        # dense corner: hubs saturate and rejections dominate; fall back to
        # uniform fill for the remainder
        stall = stall + 1 if added == 0 else 0
        if stall >= 4:
            remaining = k - len(chosen)
            pool = [
                (i, j)
                for i in range(n)
                for j in range(i + 1, n)
                if (i, j) not in chosen
            ]
            idx = rng.choice(len(pool), size=remaining, replace=False)
            chosen.update(pool[i] for i in idx.tolist())
    return sorted(chosen)


def generate(spec: SyntheticSpec) -> DynamicGraph:
    """Generate a synthetic non-uniform dynamic graph, deterministic per seed.

    Entities draw a presence length, get placed at a uniform-random start so
    the run of consecutive presences fits in [1, T], and per-snapshot edge
    counts come from the clamped, renormalized normal draws. Raises
    InfeasibleSpecError when a snapshot cannot host its edge quota.
    """
    rng = np.random.default_rng(spec.rng_seed)
    T = spec.T
    dist = spec.presence_length_distribution

    lengths: list[int] = []
    remaining = spec.total_vertices
    while remaining > 0:
        approx = max(64, remaining // max(1, int(dist.sample(rng, 1, T)[0])))
        batch = dist.sample(rng, approx, T)
        for length in batch.tolist():
            if remaining <= 0:
                break
            length = min(length, remaining)
            lengths.append(length)
            remaining -= length
    n_ent = len(lengths)
    lengths_arr = np.asarray(lengths, dtype=np.int64)
    starts = rng.integers(1, T - lengths_arr + 2)

    presences: list[tuple[int, int]] = []
    vert_lists: list[list[int]] = [[] for _ in range(T)]
    for ent in range(n_ent):
        for t in range(int(starts[ent]), int(starts[ent] + lengths_arr[ent])):
            presences.append((ent, t))
            vert_lists[t - 1].append(ent)

    draws = rng.normal(spec.edges_per_snapshot_mean, spec.edges_per_snapshot_stddev, T)
    draws = np.clip(draws, 0.0, None)
    counts = _largest_remainder(draws, spec.total_edges)

    sampler = (
        _sample_preferential_pairs
        if spec.edge_attachment == "preferential"
        else _sample_distinct_pairs
    )
    edges: list[tuple[int, int, int]] = []
    for t0 in range(T):
        vs = sorted(vert_lists[t0])
        k = int(counts[t0])
        try:
            pairs = sampler(rng, len(vs), k)
        except InfeasibleSpecError as exc:
            raise InfeasibleSpecError(f"snapshot {t0 + 1}: {exc}") from None
        for i, j in pairs:
            edges.append((t0 + 1, vs[i], vs[j]))

    return DynamicGraph(T, spec.feature_dim, presences, edges)
