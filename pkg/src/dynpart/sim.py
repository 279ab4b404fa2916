"""Deterministic epoch simulator for distributed dynamic-graph training.

Given a partitioning plan, one simulated epoch produces: per-device compute
time from the analytic cost model (one cost-model invocation per execution
unit: a fusion group for chunk plans, the whole device for snapshot/sequence
baselines, so fused chunks pay the fixed launch overhead once), cross-device
traffic from cut messages (undirected spatial edges bill one message per
direction; temporal messages follow the profile fanout), the hybrid method's
shuffle volume, data-loading bytes (each execution unit loads its members
plus halo once), padding waste of the per-device sequence batches, and the
effect of stale-embedding filtering on boundary traffic.

The wall-time estimate is an ordinal proxy: max over devices of compute plus
transfer time plus a per-peer-transfer latency, with no compute/communication
overlap. Gradient synchronization is billed as a constant all-reduce term
identical across methods. Nothing here touches a clock or global RNG, so
identical inputs give bitwise-identical reports.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assign import Assignment, assign, lambda_divergence
from .costmodel import (
    ChunkStats,
    CostCoeffs,
    MessageSet,
    ModelProfile,
    Predictor,
    true_cost,
)
from .fusion import FusionPlan, MemCoeffs, packed_padding, plan_fusion
from .graphstore import DynamicGraph
from .partition import (
    ChunkGraph,
    default_size_cap,
    partition_from_groups,
    partition_pss,
    partition_pts,
    propagate,
)
from .stale import (
    DriftSpec,
    DriftStream,
    EmbeddingCache,
    EpochLossTrace,
    StaleConfig,
    StaleMode,
    filter_transmissions,
    max_cache_gap,
    threshold,
)

__all__ = [
    "METHODS",
    "ClusterSpec",
    "Plan",
    "PlanGraphMismatch",
    "EpochReport",
    "StaleState",
    "build_plan",
    "simulate_epoch",
    "run_epochs",
    "compare_methods",
    "CompareResult",
]

METHODS = ("pgc", "pss", "pts", "pss-ts")


@dataclass(frozen=True)
class ClusterSpec:
    n_devices: int = 2
    memory_budget: int = 1 << 30
    link_bandwidth: float = 1e6  # bytes per ms, device to device
    host_bandwidth: float = 1e5  # bytes per ms, feature loading onto a device
    latency_ms: float = 0.05  # per device-to-device transfer batch
    grad_sync_bytes: int = 1 << 20

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if min(self.memory_budget, self.link_bandwidth, self.host_bandwidth) <= 0:
            raise ValueError("memory_budget and bandwidths must be > 0")
        if self.latency_ms < 0 or self.grad_sync_bytes < 0:
            raise ValueError("latency_ms and grad_sync_bytes must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n_devices": self.n_devices,
            "memory_budget": self.memory_budget,
            "link_bandwidth": self.link_bandwidth,
            "host_bandwidth": self.host_bandwidth,
            "latency_ms": self.latency_ms,
            "grad_sync_bytes": self.grad_sync_bytes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSpec":
        return cls(**d)


class PlanGraphMismatch(ValueError):
    """The plan was built for a different graph."""


@dataclass
class Plan:
    """Everything the simulator needs about one partitioning of one graph."""

    method: str
    chunk_graph: ChunkGraph
    assignment: Assignment
    fusion: FusionPlan | None
    structure_device: np.ndarray  # device of each instance, structure phase
    time_device: np.ndarray | None  # differs only for pss-ts
    workloads: dict[int, float]
    messages: MessageSet
    n_devices: int
    partition_seconds: float = 0.0
    assign_seconds: float = 0.0
    _units_cache: list | None = None
    _runs_cache: list | None = None

    @property
    def time_device_effective(self) -> np.ndarray:
        return self.structure_device if self.time_device is None else self.time_device


def _unit_cost(stats: ChunkStats, coeffs: CostCoeffs) -> float:
    return true_cost(stats, "structure", coeffs) + true_cost(stats, "time", coeffs)


def _chunk_workload(stats: ChunkStats, coeffs: CostCoeffs) -> float:
    """Analytic stand-in for a chunk's predicted workload. The time encoder's
    fixed launch overhead is paid per device batch, not per chunk, so it is
    left out to keep assignment balancing the work that actually scales."""
    return _unit_cost(stats, coeffs) - coeffs.beta_fixed


def _device_array_from_assignment(g: DynamicGraph, cg: ChunkGraph, asg: Assignment) -> np.ndarray:
    dev = np.empty(g.n_instances, dtype=np.int64)
    for c in cg.chunks:
        d = asg.device_of[c.id]
        for v in c.members:
            dev[g.index_of(v)] = d
    return dev


def _fixed_assignment(cg: ChunkGraph, device_of: dict[int, int], n_devices: int,
                      workloads: dict[int, float]) -> Assignment:
    queues: list[list[int]] = [[] for _ in range(n_devices)]
    loads = [0.0] * n_devices
    for c in cg.chunks:
        d = device_of[c.id]
        queues[d].append(c.id)
        loads[d] += workloads.get(c.id, 0.0)
    mean_w = sum(workloads.values()) / n_devices if workloads else 0.0
    return Assignment(dict(device_of), queues, loads, mean_w)


def build_plan(
    g: DynamicGraph,
    method: str,
    profile: ModelProfile,
    cluster: ClusterSpec,
    coeffs: CostCoeffs = CostCoeffs(),
    mem_coeffs: MemCoeffs = MemCoeffs(),
    size_cap: int | None = None,
    max_rounds: int = 100,
    predictor: Predictor | None = None,
    fuse: bool = True,
    messages: MessageSet | None = None,
) -> Plan:
    """Partition + assign (+ fuse, for chunk plans) one graph for one method.

    Baseline methods get their fixed block assignments; only the chunk method
    runs label propagation, the score-driven assigner, and fusion planning.
    Workloads come from the predictor when one is supplied, otherwise from
    the analytic cost model.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    msgs = messages if messages is not None else MessageSet(g, profile)
    n = g.n_instances
    n_dev = cluster.n_devices
    instances = g.instances

    def workload_of(stats: ChunkStats) -> float:
        return predictor.predict(stats) if predictor else _chunk_workload(stats, coeffs)

    if method == "pgc":
        cap = size_cap if size_cap is not None else default_size_cap(g, n_dev)
        t0 = time.perf_counter()
        cg = propagate(g, profile, cap, max_rounds)
        t1 = time.perf_counter()
        workloads = {c.id: workload_of(c.stats) for c in cg.chunks}
        asg = assign(cg, workloads, n_dev)
        t2 = time.perf_counter()
        fus = plan_fusion(cg, asg, cluster.memory_budget, mem_coeffs) if fuse else None
        sdev = _device_array_from_assignment(g, cg, asg)
        return Plan("pgc", cg, asg, fus, sdev, None, workloads, msgs, n_dev,
                    t1 - t0, t2 - t1)

    if method == "pss":
        t0 = time.perf_counter()
        snap_dev = partition_pss(g, n_dev)
        groups = np.fromiter((v.t - 1 for v in instances), dtype=np.int64, count=n)
        cg = partition_from_groups(g, profile, groups, "pss")
        t1 = time.perf_counter()
        workloads = {c.id: workload_of(c.stats) for c in cg.chunks}
        device_of = {c.id: snap_dev[c.members[0].t - 1] for c in cg.chunks}
        asg = _fixed_assignment(cg, device_of, n_dev, workloads)
        sdev = _device_array_from_assignment(g, cg, asg)
        t2 = time.perf_counter()
        return Plan("pss", cg, asg, None, sdev, None, workloads, msgs, n_dev,
                    t1 - t0, t2 - t1)

    if method == "pts":
        t0 = time.perf_counter()
        ent_dev = partition_pts(g, n_dev)
        ent_rank = {e: i for i, e in enumerate(g.entities())}
        groups = np.fromiter((ent_rank[v.entity] for v in instances), dtype=np.int64, count=n)
        cg = partition_from_groups(g, profile, groups, "pts")
        t1 = time.perf_counter()
        workloads = {c.id: workload_of(c.stats) for c in cg.chunks}
        device_of = {c.id: ent_dev[c.members[0].entity] for c in cg.chunks}
        asg = _fixed_assignment(cg, device_of, n_dev, workloads)
        sdev = _device_array_from_assignment(g, cg, asg)
        t2 = time.perf_counter()
        return Plan("pts", cg, asg, None, sdev, None, workloads, msgs, n_dev,
                    t1 - t0, t2 - t1)

    # pss-ts: snapshot blocks for the structure phase, entity blocks for time
    t0 = time.perf_counter()
    snap_dev = partition_pss(g, n_dev)
    ent_dev = partition_pts(g, n_dev)
    groups = np.fromiter((v.t - 1 for v in instances), dtype=np.int64, count=n)
    cg = partition_from_groups(g, profile, groups, "pss-ts")
    t1 = time.perf_counter()
    workloads = {c.id: workload_of(c.stats) for c in cg.chunks}
    device_of = {c.id: snap_dev[c.members[0].t - 1] for c in cg.chunks}
    asg = _fixed_assignment(cg, device_of, n_dev, workloads)
    sdev = _device_array_from_assignment(g, cg, asg)
    tdev = np.fromiter((ent_dev[v.entity] for v in instances), dtype=np.int64, count=n)
    t2 = time.perf_counter()
    return Plan("pss-ts", cg, asg, None, sdev, tdev, workloads, msgs, n_dev,
                t1 - t0, t2 - t1)


# -- per-epoch accounting -----------------------------------------------------


@dataclass
class EpochReport:
    method: str
    epoch: int
    per_device_compute_ms: list[float]
    per_device_wall_ms: list[float]
    spatial_traffic_bytes: int
    temporal_traffic_bytes: int
    shuffle_bytes: int
    loading_bytes: int
    padding_slots: int
    naive_padding_slots: int
    load_divergence: float
    wall_ms: float
    stale_theta: float = 0.0
    stale_d: float = 0.0
    stale_sent_bytes: int = 0
    stale_avoided_bytes: int = 0
    stale_reduction_pct: float = 0.0

    @property
    def traffic_bytes(self) -> int:
        return self.spatial_traffic_bytes + self.temporal_traffic_bytes + self.shuffle_bytes

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "epoch": self.epoch,
            "per_device_compute_ms": self.per_device_compute_ms,
            "per_device_wall_ms": self.per_device_wall_ms,
            "spatial_traffic_bytes": self.spatial_traffic_bytes,
            "temporal_traffic_bytes": self.temporal_traffic_bytes,
            "shuffle_bytes": self.shuffle_bytes,
            "traffic_bytes": self.traffic_bytes,
            "loading_bytes": self.loading_bytes,
            "padding_slots": self.padding_slots,
            "naive_padding_slots": self.naive_padding_slots,
            "load_divergence": self.load_divergence,
            "wall_ms": self.wall_ms,
            "stale_theta": self.stale_theta,
            "stale_d": self.stale_d,
            "stale_sent_bytes": self.stale_sent_bytes,
            "stale_avoided_bytes": self.stale_avoided_bytes,
            "stale_reduction_pct": self.stale_reduction_pct,
        }


class StaleState:
    """Cross-epoch staleness bookkeeping: cache, loss trace, drift stream."""

    def __init__(
        self,
        g: DynamicGraph,
        drift_spec: DriftSpec,
        seed: int = 0,
        initial_loss: float = 2.0,
        loss_decay: float = 0.97,
    ):
        self.cache = EmbeddingCache()
        self.trace = EpochLossTrace()
        self.stream = DriftStream(list(range(g.n_instances)), drift_spec, seed)
        self.initial_loss = initial_loss
        self.loss_decay = loss_decay

    def advance_loss(self, epoch: int) -> None:
        self.trace.append(self.initial_loss * self.loss_decay ** (epoch - 1))


def _merged_stats(g: DynamicGraph, profile: ModelProfile,
                  stats_list: Sequence[ChunkStats]) -> ChunkStats:
    """Stats of chunks executed as one unit; degree-sum edge counts add."""
    return ChunkStats(
        n_vertices=sum(s.n_vertices for s in stats_list),
        n_edges=sum(s.n_edges for s in stats_list),
        total_sequence_length=sum(s.total_sequence_length for s in stats_list),
        feature_dim=g.feature_dim,
        layer_dims=(profile.embedding_dim,) * profile.blocks,
    )


def _pgc_units(g: DynamicGraph, plan: Plan, profile: ModelProfile) -> list[tuple[int, ChunkStats, int]]:
    """(device, unit stats, loaded vertex count) per execution unit."""
    cg = plan.chunk_graph
    by_id = {c.id: c for c in cg.chunks}
    units = []
    if plan.fusion is not None:
        group_lists = [
            (dev, [by_id[cid] for cid in grp.chunk_ids])
            for dev, groups in sorted(plan.fusion.groups_by_device.items())
            for grp in groups
        ]
    else:
        group_lists = [(plan.assignment.device_of[c.id], [c]) for c in cg.chunks]
    for dev, chunks in group_lists:
        members = set()
        halo = set()
        for c in chunks:
            members.update(c.members)
            halo.update(c.halo)
        stats = _merged_stats(g, profile, [c.stats for c in chunks])
        units.append((dev, stats, len(members) + len(halo - members)))
    return units


def _baseline_units(g: DynamicGraph, plan: Plan, profile: ModelProfile) -> list[tuple[int, ChunkStats, int]]:
    """One execution unit per device: the device batches everything it owns."""
    n_dev = plan.n_devices
    sdev = plan.structure_device
    n_vertices = np.bincount(sdev, minlength=n_dev)

    se = g.spatial_edge_index()
    degree_sum = np.zeros(n_dev, dtype=np.int64)
    if len(se):
        du, dv = sdev[se[:, 0]], sdev[se[:, 1]]
        degree_sum = np.bincount(du, minlength=n_dev) + np.bincount(dv, minlength=n_dev)

    # halo: external endpoints of cut spatial edges / consecutive temporal links
    tl = g.temporal_link_index()
    halo_sets: list[set[int]] = [set() for _ in range(n_dev)]
    for arr in (se, tl):
        if not len(arr):
            continue
        da, db = sdev[arr[:, 0]], sdev[arr[:, 1]]
        cut = da != db
        for a, b, x, y in zip(arr[cut, 0].tolist(), arr[cut, 1].tolist(),
                              da[cut].tolist(), db[cut].tolist()):
            halo_sets[x].add(b)
            halo_sets[y].add(a)

    units = []
    for dev in range(n_dev):
        stats = ChunkStats(
            n_vertices=int(n_vertices[dev]),
            n_edges=int(degree_sum[dev]),
            total_sequence_length=int(n_vertices[dev]),
            feature_dim=g.feature_dim,
            layer_dims=(profile.embedding_dim,) * profile.blocks,
        )
        units.append((dev, stats, int(n_vertices[dev]) + len(halo_sets[dev])))
    return units


def _device_sequences(g: DynamicGraph, tdev: np.ndarray, n_dev: int) -> list[list[int]]:
    """Per device, the lengths of maximal same-device runs of each entity's
    presence chain (what the device's time encoder batches together)."""
    runs: list[list[int]] = [[] for _ in range(n_dev)]
    for e in g.entities():
        ts = g.presence_of(e)
        prev_dev = None
        length = 0
        for t in ts:
            d = int(tdev[g.index_of((e, t))])
            if d == prev_dev:
                length += 1
            else:
                if prev_dev is not None:
                    runs[prev_dev].append(length)
                prev_dev = d
                length = 1
        if prev_dev is not None:
            runs[prev_dev].append(length)
    return runs


def simulate_epoch(
    g: DynamicGraph,
    plan: Plan,
    profile: ModelProfile,
    cluster: ClusterSpec,
    stale_config: StaleConfig = StaleConfig.off(),
    epoch: int = 1,
    coeffs: CostCoeffs = CostCoeffs(),
    stale_state: StaleState | None = None,
) -> EpochReport:
    """Account one training epoch under the given plan; see module docstring."""
    if len(plan.structure_device) != g.n_instances:
        raise PlanGraphMismatch(
            f"plan covers {len(plan.structure_device)} instances, graph has {g.n_instances}"
        )
    if plan.n_devices != cluster.n_devices:
        raise PlanGraphMismatch("plan and cluster disagree on device count")
    msgs = plan.messages
    sdev = plan.structure_device
    tdev = plan.time_device_effective
    n_dev = cluster.n_devices

    cut = msgs.cut_mask(sdev, None if plan.time_device is None else tdev)

    # staleness: boundary sources may be reused instead of transmitted
    theta = 0.0
    d_r = 0.0
    sent_bytes_total = 0
    avoided_bytes = 0
    billed = cut
    if stale_config.mode is not StaleMode.OFF and stale_state is not None:
        emb = stale_state.stream.epoch(epoch)
        boundary = np.unique(msgs.src[cut]) if cut.any() else np.empty(0, dtype=np.int64)
        current = {int(i): emb[int(i)] for i in boundary}
        if epoch >= 2:
            d_r = max_cache_gap(stale_state.cache, current)
            theta = threshold(stale_state.trace, epoch, d_r, stale_config)
        decision = filter_transmissions(current, stale_state.cache, theta)
        send_mask = np.zeros(g.n_instances, dtype=bool)
        for k in decision.send:
            send_mask[k] = True
        billed = cut & send_mask[msgs.src]
        sent_bytes_total = int(msgs.nbytes[billed].sum())
        avoided_bytes = int(msgs.nbytes[cut & ~billed].sum())

    spatial_bytes = int(msgs.nbytes[billed & msgs.is_spatial].sum())
    temporal_bytes = int(msgs.nbytes[billed & ~msgs.is_spatial].sum())

    shuffle_bytes = 0
    if plan.time_device is not None:
        moved = int(np.count_nonzero(sdev != plan.time_device))
        shuffle_bytes = moved * profile.embedding_dim * profile.bytes_per_scalar

    # structure-encoder work and feature loading, per execution unit
    # (plan-invariant, cached across epochs)
    if plan._units_cache is None:
        plan._units_cache = (
            _pgc_units(g, plan, profile) if plan.method == "pgc"
            else _baseline_units(g, plan, profile)
        )
    compute = [0.0] * n_dev
    loading_dev = [0] * n_dev
    for dev, stats, loaded in plan._units_cache:
        compute[dev] += true_cost(stats, "structure", coeffs)
        loading_dev[dev] += loaded * g.feature_dim * profile.bytes_per_scalar
    loading = sum(loading_dev)

    # time-encoder work: one packed batch per device, billed on its slot
    # count, so padding costs compute and packing saves it
    if plan._runs_cache is None:
        per_dev = _device_sequences(g, tdev, n_dev)
        padding = naive_padding = 0
        slots: list[int] = []
        for lengths in per_dev:
            packed, naive = packed_padding(lengths)
            padding += packed
            naive_padding += naive
            slots.append(sum(lengths) + packed)
        plan._runs_cache = (padding, naive_padding, slots)
    padding, naive_padding, device_slots = plan._runs_cache
    for dev in range(n_dev):
        if device_slots[dev]:
            stats = ChunkStats(
                n_vertices=0,
                n_edges=0,
                total_sequence_length=device_slots[dev],
                feature_dim=g.feature_dim,
                layer_dims=(profile.embedding_dim,) * profile.blocks,
            )
            compute[dev] += true_cost(stats, "time", coeffs)

    # per-device transfer bytes and distinct peer transfers
    comm_bytes = np.zeros(n_dev, dtype=np.int64)
    peer_pairs: set[tuple[int, int]] = set()
    if billed.any():
        msrc = np.where(msgs.is_spatial, sdev[msgs.src], tdev[msgs.src])[billed]
        mdst = np.where(msgs.is_spatial, sdev[msgs.dst], tdev[msgs.dst])[billed]
        nb = msgs.nbytes[billed]
        np.add.at(comm_bytes, msrc, nb)
        np.add.at(comm_bytes, mdst, nb)
        peer_pairs = set(zip(msrc.tolist(), mdst.tolist()))
    if plan.time_device is not None:
        moved_mask = sdev != plan.time_device
        per_inst = profile.embedding_dim * profile.bytes_per_scalar
        np.add.at(comm_bytes, sdev[moved_mask], per_inst)
        np.add.at(comm_bytes, plan.time_device[moved_mask], per_inst)
        peer_pairs |= set(
            zip(sdev[moved_mask].tolist(), plan.time_device[moved_mask].tolist())
        )
    transfers = np.zeros(n_dev, dtype=np.int64)
    for a, b in peer_pairs:
        transfers[a] += 1
        transfers[b] += 1

    wall = [
        compute[d]
        + (int(comm_bytes[d]) + cluster.grad_sync_bytes) / cluster.link_bandwidth
        + loading_dev[d] / cluster.host_bandwidth
        + cluster.latency_ms * int(transfers[d])
        for d in range(n_dev)
    ]

    full_cut_bytes = sent_bytes_total + avoided_bytes
    reduction = 100.0 * avoided_bytes / full_cut_bytes if full_cut_bytes else 0.0

    return EpochReport(
        method=plan.method,
        epoch=epoch,
        per_device_compute_ms=compute,
        per_device_wall_ms=wall,
        spatial_traffic_bytes=spatial_bytes,
        temporal_traffic_bytes=temporal_bytes,
        shuffle_bytes=shuffle_bytes,
        loading_bytes=loading,
        padding_slots=padding,
        naive_padding_slots=naive_padding,
        load_divergence=lambda_divergence(wall),
        wall_ms=max(wall),
        stale_theta=theta,
        stale_d=d_r,
        stale_sent_bytes=sent_bytes_total,
        stale_avoided_bytes=avoided_bytes,
        stale_reduction_pct=reduction,
    )


def run_epochs(
    g: DynamicGraph,
    plan: Plan,
    profile: ModelProfile,
    cluster: ClusterSpec,
    epochs: int,
    stale_config: StaleConfig = StaleConfig.off(),
    drift_spec: DriftSpec | None = None,
    seed: int = 0,
    coeffs: CostCoeffs = CostCoeffs(),
    initial_loss: float = 2.0,
    loss_decay: float = 0.97,
) -> list[EpochReport]:
    """Simulate several epochs, threading staleness state across them."""
    state = None
    if stale_config.mode is not StaleMode.OFF:
        state = StaleState(
            g,
            drift_spec or DriftSpec(dim=profile.embedding_dim),
            seed=seed,
            initial_loss=initial_loss,
            loss_decay=loss_decay,
        )
    reports = []
    for r in range(1, epochs + 1):
        reports.append(
            simulate_epoch(g, plan, profile, cluster, stale_config, r, coeffs, state)
        )
        if state is not None:
            state.advance_loss(r)
    return reports


MEAN_FIELDS = (
    "spatial_traffic_bytes",
    "temporal_traffic_bytes",
    "shuffle_bytes",
    "traffic_bytes",
    "loading_bytes",
    "padding_slots",
    "naive_padding_slots",
    "load_divergence",
    "wall_ms",
    "stale_reduction_pct",
)


@dataclass
class CompareResult:
    methods: list[str]
    plans: dict[str, Plan]
    reports: dict[str, list[EpochReport]]

    def mean_report(self, method: str) -> dict:
        reps = self.reports[method]
        out: dict[str, float] = {"method": method, "epochs": len(reps)}
        for f in MEAN_FIELDS:
            vals = [getattr(r, f) if f != "traffic_bytes" else r.traffic_bytes for r in reps]
            out[f] = sum(vals) / len(vals)
        return out

    def csv_text(self) -> str:
        cols = ["method", "epochs", *MEAN_FIELDS]
        lines = [",".join(cols)]
        for m in self.methods:
            mean = self.mean_report(m)
            lines.append(",".join(_csv_cell(mean[c]) for c in cols))
        return "\n".join(lines) + "\n"

    def table_text(self) -> str:
        cols = ["method", *MEAN_FIELDS]
        rows = [[str(self.mean_report(m)[c]) for c in cols] for m in self.methods]
        widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
        header = "  ".join(c.ljust(widths[i]) for i, c in enumerate(cols))
        body = ["  ".join(r[i].ljust(widths[i]) for i in range(len(cols))) for r in rows]
        return "\n".join([header, *body]) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def compare_methods(
    g: DynamicGraph,
    profile: ModelProfile,
    cluster: ClusterSpec,
    methods: Sequence[str] = METHODS,
    epochs: int = 3,
    coeffs: CostCoeffs = CostCoeffs(),
    mem_coeffs: MemCoeffs = MemCoeffs(),
    stale_config: StaleConfig = StaleConfig.off(),
    drift_spec: DriftSpec | None = None,
    size_cap: int | None = None,
    max_rounds: int = 100,
    seed: int = 0,
    predictor: Predictor | None = None,
) -> CompareResult:
    """Run every method on identical inputs and collect per-epoch reports."""
    msgs = MessageSet(g, profile)
    plans = {}
    reports = {}
    for m in methods:
        plan = build_plan(
            g, m, profile, cluster, coeffs, mem_coeffs,
            size_cap=size_cap, max_rounds=max_rounds, predictor=predictor,
            messages=msgs,
        )
        plans[m] = plan
        reports[m] = run_epochs(
            g, plan, profile, cluster, epochs, stale_config, drift_spec,
            seed=seed, coeffs=coeffs,
        )
    return CompareResult(list(methods), plans, reports)
