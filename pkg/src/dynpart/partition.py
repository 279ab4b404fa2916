"""Chunk generation via weighted label propagation, plus baseline partitioners.

Every vertex-instance starts with a unique label (its global snapshot-major
index). Labels then flow along spatial edges and virtual temporal links
between consecutive presences; a vertex re-labels itself with the incoming
label whose senders would ship it the most embedding traffic, which greedily
maximizes the traffic kept inside chunks (equivalently, minimizes the cut).
Labels held by ``size_cap`` or more vertices are frozen out of adoption so
chunks stay boundedly sized.

The update schedule is semi-synchronous: vertices are greedily colored so no
two adjacent ones share a color, and each round sweeps the color classes in
order, updating a whole class at once against live labels. A fully
synchronous sweep can 2-cycle on bipartite structures (an entity's presence
chain is a path), while this schedule strictly increases the total internal
edge weight on every label change and therefore always terminates.

Baselines: ``partition_pss`` deals contiguous equal-count snapshot blocks to
devices, ``partition_pts`` equal-count entity blocks, and ``partition_pss_ts``
combines them (snapshot blocks for the structure phase, entity blocks for the
time phase, with the shuffle in between billed by the simulator).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .costmodel import ChunkStats, MessageSet, ModelProfile, TemporalFanout, edge_traffic
from .graphstore import DynamicGraph, VertexInstance

__all__ = [
    "Chunk",
    "ChunkGraph",
    "init_labels",
    "propagate",
    "default_size_cap",
    "partition_pss",
    "partition_pts",
    "partition_pss_ts",
    "chunk_graph_to_json",
    "chunk_graph_from_json",
]


@dataclass(frozen=True)
class Chunk:
    """A set of vertex-instances grouped for single-device execution."""

    id: int
    members: tuple[VertexInstance, ...]
    stats: ChunkStats
    halo: frozenset[VertexInstance]


class ChunkGraph:
    """Chunks plus the symmetric inter-chunk communication cost map.

    ``inter_cost[(a, b)]`` (a < b) sums the bytes of every message whose
    endpoints fall in different chunks a and b, with the same per-direction
    billing the epoch simulator uses. ``inter_edges`` counts the undirected
    spatial edges between the pair (used by fusion memory estimates).
    """

    def __init__(
        self,
        chunks: list[Chunk],
        inter_cost: dict[tuple[int, int], int],
        inter_edges: dict[tuple[int, int], int],
        total_message_bytes: int,
        method: str = "pgc",
    ):
        self.chunks = chunks
        self.inter_cost = inter_cost
        self.inter_edges = inter_edges
        self.total_message_bytes = total_message_bytes
        self.method = method
        self._adjacency: dict[int, list[tuple[int, int]]] | None = None

    def cost_between(self, a: int, b: int) -> int:
        if a == b:
            return 0
        key = (a, b) if a < b else (b, a)
        return self.inter_cost.get(key, 0)

    def neighbors(self, a: int) -> list[tuple[int, int]]:
        """(other chunk id, bytes) pairs with nonzero cost to chunk ``a``."""
        if self._adjacency is None:
            adj: dict[int, list[tuple[int, int]]] = {c.id: [] for c in self.chunks}
            for (i, j), w in self.inter_cost.items():
                adj[i].append((j, w))
                adj[j].append((i, w))
            self._adjacency = adj
        return self._adjacency[a]

    @property
    def internal_bytes(self) -> int:
        return self.total_message_bytes - sum(self.inter_cost.values())


def init_labels(g: DynamicGraph) -> np.ndarray:
    """Unique initial labels: a vertex's global snapshot-major index, i.e.
    the number of instances in earlier snapshots plus its entity-ascending
    rank inside its own snapshot."""
    return np.arange(g.n_instances, dtype=np.int64)


def default_size_cap(g: DynamicGraph, n_devices: int) -> int:
    """Cap chunks at 1/(4 * devices) of the instance count so every device
    can receive several chunks."""
    return max(1, -(-g.n_instances // (4 * n_devices)))


def _temporal_link_weights(g: DynamicGraph, profile: ModelProfile) -> np.ndarray:
    """Per consecutive-presence link (in temporal_link_index order), the
    one-direction traffic that keeping its endpoints together protects.

    Previous-only fanout: the link itself carries one message. All-snapshots
    fanout: splitting an L-long chain after position k severs k*(L-k) pairs,
    so the link is weighted by the pairs it guards; without this, propagation
    would treat sequence integrity as cheaply as a single hop and attention
    models would shed far more traffic than they save.
    """
    tt = edge_traffic(profile, "temporal")
    if profile.temporal_fanout is TemporalFanout.PREVIOUS_ONLY:
        return np.full(len(g.temporal_link_index()), tt, dtype=np.int64)
    weights = []
    for e in sorted(g.entities()):
        L = len(g.presence_of(e))
        for k in range(1, L):
            weights.append(tt * k * (L - k))
    return np.asarray(weights, dtype=np.int64)


def _propagation_edges(g: DynamicGraph, profile: ModelProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed propagation messages: spatial edges both ways at spatial
    weight, consecutive temporal links both ways at fanout-aware weight.

    Propagation always walks the consecutive-presence chain regardless of the
    profile's fanout; fanout changes link weights and traffic accounting only.
    """
    ts = edge_traffic(profile, "spatial")
    se = g.spatial_edge_index()
    tl = g.temporal_link_index()
    tw = _temporal_link_weights(g, profile)
    src = np.concatenate([se[:, 0], se[:, 1], tl[:, 0], tl[:, 1]])
    dst = np.concatenate([se[:, 1], se[:, 0], tl[:, 1], tl[:, 0]])
    w = np.concatenate([np.full(2 * len(se), ts, dtype=np.int64), tw, tw])
    return src, dst, w


def _greedy_coloring(n: int, src: np.ndarray, dst: np.ndarray) -> list[np.ndarray]:
    """Deterministic greedy coloring; returns the vertex indices per color."""
    order = np.lexsort((src, dst))
    nbr_sorted = src[order]
    dst_sorted = dst[order]
    starts = np.searchsorted(dst_sorted, np.arange(n + 1))
    colors = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        used = set(colors[nbr_sorted[starts[v] : starts[v + 1]]].tolist())
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    return [np.flatnonzero(colors == c) for c in range(int(colors.max()) + 1 if n else 0)]


def _class_argmax(
    d: np.ndarray, lab: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Aggregate message weights by (dst, label) and pick, per dst, the label
    with maximum total weight, ties to the smallest label id.

    Returns (dst ids, best label, best weight, segment keys, segment sums) so
    the caller can also look up the weight of a specific label per dst.
    """
    order = np.lexsort((lab, d))
    d2, lab2, w2 = d[order], lab[order], w[order]
    boundary = np.empty(len(d2), dtype=bool)
    boundary[0] = True
    np.not_equal(d2[1:], d2[:-1], out=boundary[1:])
    boundary[1:] |= lab2[1:] != lab2[:-1]
    seg_start = np.flatnonzero(boundary)
    seg_d = d2[seg_start]
    seg_lab = lab2[seg_start]
    seg_sum = np.add.reduceat(w2, seg_start)
    pick = np.lexsort((seg_lab, -seg_sum, seg_d))
    sd = seg_d[pick]
    first = np.empty(len(sd), dtype=bool)
    if len(sd):
        first[0] = True
        np.not_equal(sd[1:], sd[:-1], out=first[1:])
    sel = pick[first]
    return seg_d[sel], seg_lab[sel], seg_sum[sel], np.stack([seg_d, seg_lab]), seg_sum


def propagate(
    g: DynamicGraph,
    profile: ModelProfile,
    size_cap: int,
    max_rounds: int = 100,
) -> ChunkGraph:
    """Run weighted label propagation and package the result as a ChunkGraph.

    Always yields a valid partition: vertices keep their own label when no
    admissible incoming label strictly beats it, so isolated vertices become
    singleton chunks. Deterministic: ties break to the smallest label id and
    adoptions apply in ascending vertex order with live cap accounting, which
    also guarantees no chunk ever exceeds ``size_cap``.
    """
    if size_cap < 1:
        raise ValueError("size_cap must be >= 1")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    n = g.n_instances
    labels = init_labels(g)
    if n == 0:
        return _build_chunk_graph(g, profile, labels)
    src, dst, w = _propagation_edges(g, profile)
    if len(src) == 0:
        return _build_chunk_graph(g, profile, labels)
    classes = _greedy_coloring(n, src, dst)
    counts = np.bincount(labels, minlength=n)

    # Pre-split the message arrays by destination color class.
    class_of = np.empty(n, dtype=np.int64)
    for ci, members in enumerate(classes):
        class_of[members] = ci
    msg_class = class_of[dst]
    by_class = [np.flatnonzero(msg_class == ci) for ci in range(len(classes))]

    for _round in range(max_rounds):
        changed = 0
        for ci in range(len(classes)):
            sel = by_class[ci]
            if len(sel) == 0:
                continue
            d = dst[sel]
            lab = labels[src[sel]]
            wgt = w[sel]
            admissible = counts[lab] < size_cap
            if not admissible.any():
                continue
            d, lab, wgt = d[admissible], lab[admissible], wgt[admissible]
            best_d, best_lab, best_w, seg_keys, seg_sum = _class_argmax(d, lab, wgt)
            cur = labels[best_d]
            # weight the current label received, 0 when absent
            seg_d, seg_lab = seg_keys
            pos = np.searchsorted(seg_d * (np.int64(n)) + seg_lab, best_d * np.int64(n) + cur)
            cur_w = np.zeros(len(best_d), dtype=np.int64)
            inside = pos < len(seg_d)
            hit = inside & (seg_d[np.minimum(pos, len(seg_d) - 1)] == best_d) & (
                seg_lab[np.minimum(pos, len(seg_d) - 1)] == cur
            )
            cur_w[hit] = seg_sum[np.minimum(pos, len(seg_d) - 1)][hit]
            switching = (best_w > cur_w) & (best_lab != cur)
            for v, c_new in zip(best_d[switching].tolist(), best_lab[switching].tolist()):
                if counts[c_new] >= size_cap:
                    continue
                counts[labels[v]] -= 1
                counts[c_new] += 1
                labels[v] = c_new
                changed += 1
        if changed == 0:
            break

    return _build_chunk_graph(g, profile, labels)


def _derive_stats(
    g: DynamicGraph, profile: ModelProfile, n_vertices: int, n_edges: int
) -> ChunkStats:
    """Stats of a derived chunk. ``n_edges`` is the members' spatial degree
    sum, i.e. the directed aggregations the chunk's vertices perform: an
    internal edge counts twice (one per direction), a boundary edge once.
    Partitioning therefore moves structure work around without creating or
    destroying it, and merged units sum exactly."""
    return ChunkStats(
        n_vertices=n_vertices,
        n_edges=n_edges,
        total_sequence_length=n_vertices,
        feature_dim=g.feature_dim,
        layer_dims=(profile.embedding_dim,) * profile.blocks,
    )


def _build_chunk_graph(
    g: DynamicGraph,
    profile: ModelProfile,
    labels: np.ndarray,
    method: str = "pgc",
) -> ChunkGraph:
    """Group same-label vertices, derive stats/halo, and bill inter-chunk cost."""
    n = g.n_instances
    uniq, chunk_of = np.unique(labels, return_inverse=True)
    n_chunks = len(uniq)
    instances = g.instances

    members: list[list[VertexInstance]] = [[] for _ in range(n_chunks)]
    for i in range(n):
        members[chunk_of[i]].append(instances[i])

    # spatial degree sums per chunk (directed aggregations owned)
    se = g.spatial_edge_index()
    degree_sum = np.zeros(n_chunks, dtype=np.int64)
    if len(se):
        cu, cv = chunk_of[se[:, 0]], chunk_of[se[:, 1]]
        degree_sum = np.bincount(cu, minlength=n_chunks) + np.bincount(
            cv, minlength=n_chunks
        )

    # halo: boundary neighbors over spatial edges and consecutive temporal links
    halos: list[set[VertexInstance]] = [set() for _ in range(n_chunks)]
    tl = g.temporal_link_index()
    pairs = np.concatenate([se, tl]) if len(se) or len(tl) else np.empty((0, 2), dtype=np.int64)
    for a, b in pairs.tolist():
        ca, cb = chunk_of[a], chunk_of[b]
        if ca != cb:
            halos[ca].add(instances[b])
            halos[cb].add(instances[a])

    chunks = [
        Chunk(
            id=c,
            members=tuple(members[c]),
            stats=_derive_stats(g, profile, len(members[c]), int(degree_sum[c])),
            halo=frozenset(halos[c]),
        )
        for c in range(n_chunks)
    ]

    msgs = MessageSet(g, profile)
    inter_cost: dict[tuple[int, int], int] = {}
    if len(msgs.src):
        cs, cd = chunk_of[msgs.src], chunk_of[msgs.dst]
        cut = cs != cd
        lo = np.minimum(cs[cut], cd[cut])
        hi = np.maximum(cs[cut], cd[cut])
        nb = msgs.nbytes[cut]
        key = lo * np.int64(n_chunks) + hi
        order = np.argsort(key, kind="stable")
        key, nb = key[order], nb[order]
        starts = np.flatnonzero(np.concatenate([[True], key[1:] != key[:-1]]))
        sums = np.add.reduceat(nb, starts) if len(starts) else np.empty(0, dtype=np.int64)
        for k, s in zip(key[starts].tolist(), sums.tolist()):
            inter_cost[(k // n_chunks, k % n_chunks)] = int(s)

    inter_edges: dict[tuple[int, int], int] = {}
    if len(se):
        cu, cv = chunk_of[se[:, 0]], chunk_of[se[:, 1]]
        for a, b in zip(cu.tolist(), cv.tolist()):
            if a != b:
                key2 = (a, b) if a < b else (b, a)
                inter_edges[key2] = inter_edges.get(key2, 0) + 1

    return ChunkGraph(chunks, inter_cost, inter_edges, msgs.total_bytes, method=method)


def partition_from_groups(
    g: DynamicGraph,
    profile: ModelProfile,
    group_of_instance: np.ndarray,
    method: str,
) -> ChunkGraph:
    """Build a ChunkGraph from an explicit instance -> group assignment."""
    return _build_chunk_graph(g, profile, np.asarray(group_of_instance, dtype=np.int64), method)


# -- baseline partitioners -----------------------------------------------------


def partition_pss(g: DynamicGraph, n_devices: int) -> list[int]:
    """Device of each snapshot (index t-1): contiguous equal-count blocks."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    if n_devices > g.T:
        raise ValueError(f"cannot split {g.T} snapshots over {n_devices} devices")
    base, extra = divmod(g.T, n_devices)
    out: list[int] = []
    for dev in range(n_devices):
        size = base + (1 if dev < extra else 0)
        out.extend([dev] * size)
    return out


def partition_pts(g: DynamicGraph, n_devices: int) -> dict[int, int]:
    """Device of each entity: contiguous equal-count blocks in id order."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    ents = g.entities()
    if n_devices > len(ents):
        raise ValueError(f"cannot split {len(ents)} entities over {n_devices} devices")
    base, extra = divmod(len(ents), n_devices)
    out: dict[int, int] = {}
    i = 0
    for dev in range(n_devices):
        size = base + (1 if dev < extra else 0)
        for e in ents[i : i + size]:
            out[e] = dev
        i += size
    return out


def partition_pss_ts(g: DynamicGraph, n_devices: int) -> tuple[list[int], dict[int, int]]:
    """Snapshot-block map for the structure phase, entity-block map for the
    time phase; vertices moving between the two incur shuffle traffic."""
    return partition_pss(g, n_devices), partition_pts(g, n_devices)


# -- chunk file (JSON) -----------------------------------------------------------


def chunk_graph_to_json(cg: ChunkGraph, profile: ModelProfile) -> dict:
    return {
        "version": 1,
        "method": cg.method,
        "profile": profile.to_dict(),
        "total_message_bytes": cg.total_message_bytes,
        "chunks": [
            {
                "id": c.id,
                "members": [[v.entity, v.t] for v in c.members],
                "halo": sorted([v.entity, v.t] for v in c.halo),
                "stats": c.stats.to_dict(),
            }
            for c in cg.chunks
        ],
        "inter_cost": [[a, b, w] for (a, b), w in sorted(cg.inter_cost.items())],
        "inter_edges": [[a, b, k] for (a, b), k in sorted(cg.inter_edges.items())],
    }


def chunk_graph_from_json(doc: dict) -> tuple[ChunkGraph, ModelProfile]:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported chunk file version {doc.get('version')!r}")
    profile = ModelProfile.from_dict(doc["profile"])
    chunks = [
        Chunk(
            id=c["id"],
            members=tuple(VertexInstance(e, t) for e, t in c["members"]),
            stats=ChunkStats.from_dict(c["stats"]),
            halo=frozenset(VertexInstance(e, t) for e, t in c["halo"]),
        )
        for c in doc["chunks"]
    ]
    inter_cost = {(a, b): w for a, b, w in doc["inter_cost"]}
    inter_edges = {(a, b): k for a, b, k in doc["inter_edges"]}
    cg = ChunkGraph(
        chunks, inter_cost, inter_edges, doc["total_message_bytes"], method=doc["method"]
    )
    return cg, profile
