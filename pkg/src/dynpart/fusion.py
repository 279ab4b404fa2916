"""Chunk fusion: spatial merge planning, sequence packing, masked GRU kernel.

Spatial fusion greedily merges the pair of same-device chunk groups with the
highest inter-chunk transmission (the best proxy for redundant halo loading)
until nothing fits under the device memory budget. Memory is estimated
analytically from coefficients applied to loaded vertices (members plus halo)
and edges, standing in for a first-epoch measurement.

Temporal fusion packs variable-length sequences into fixed-length rows by
first-fit-decreasing, concatenating short sequences instead of padding. A
carry mask records, per adjacent slot pair, whether the hidden state may flow
across; the masked GRU forward multiplies the incoming hidden state by that
mask in every gate's recurrent path, so a packed batch reproduces the
per-sequence forward exactly. Masking only the update gate would still leak
state through the candidate path.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .partition import Chunk, ChunkGraph
from .assign import Assignment
from .graphstore import VertexInstance

__all__ = [
    "MemCoeffs",
    "BudgetExceededError",
    "FusionGroup",
    "FusionPlan",
    "plan_spatial_fusion",
    "plan_fusion",
    "PackedBatch",
    "pack_sequences",
    "packed_padding",
    "padding_waste",
    "GruCell",
    "gru_forward",
    "gru_forward_masked",
]


class BudgetExceededError(ValueError):
    """A single chunk already exceeds the device memory budget."""


@dataclass(frozen=True)
class MemCoeffs:
    """Analytic memory-estimate calibration (bytes per loaded vertex / edge)."""

    bytes_per_vertex: int = 256
    bytes_per_edge: int = 64

    def to_dict(self) -> dict:
        return {"bytes_per_vertex": self.bytes_per_vertex, "bytes_per_edge": self.bytes_per_edge}

    @classmethod
    def from_dict(cls, d: dict) -> "MemCoeffs":
        return cls(**d)


@dataclass
class FusionGroup:
    chunk_ids: tuple[int, ...]
    memory_bytes: int
    saved_bytes: int

    def to_dict(self) -> dict:
        return {
            "chunks": list(self.chunk_ids),
            "memory_bytes": self.memory_bytes,
            "saved_bytes": self.saved_bytes,
        }


@dataclass
class FusionPlan:
    groups_by_device: dict[int, list[FusionGroup]]
    memory_budget: int

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "memory_budget": self.memory_budget,
            "devices": {
                str(dev): [grp.to_dict() for grp in groups]
                for dev, groups in sorted(self.groups_by_device.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FusionPlan":
        groups = {
            int(dev): [
                FusionGroup(tuple(g["chunks"]), g["memory_bytes"], g["saved_bytes"])
                for g in glist
            ]
            for dev, glist in doc["devices"].items()
        }
        return cls(groups, doc["memory_budget"])


class _Group:
    __slots__ = ("chunk_ids", "members", "halo", "edges", "saved")

    def __init__(self, chunk: Chunk):
        self.chunk_ids = [chunk.id]
        self.members = set(chunk.members)
        self.halo = set(chunk.halo)
        self.edges = chunk.stats.n_edges
        self.saved = 0


def _group_memory(grp: _Group, coeffs: MemCoeffs) -> int:
    loaded = len(grp.members) + len(grp.halo - grp.members)
    return coeffs.bytes_per_vertex * loaded + coeffs.bytes_per_edge * grp.edges


def plan_spatial_fusion(
    chunks_on_device: Sequence[Chunk],
    inter_cost: Mapping[tuple[int, int], int],
    memory_budget: int,
    mem_coeffs: MemCoeffs = MemCoeffs(),
) -> list[FusionGroup]:
    """Greedy pairwise merging of one device's chunks under a memory budget.

    Only pairs with positive inter-chunk transmission are ever merged; a merge
    whose combined estimate would exceed the budget is discarded. Raises
    BudgetExceededError if any single chunk is already over budget.
    """
    groups: dict[int, _Group] = {}
    for c in chunks_on_device:
        grp = _Group(c)
        mem = _group_memory(grp, mem_coeffs)
        if mem > memory_budget:
            raise BudgetExceededError(
                f"chunk {c.id} needs {mem} bytes, budget is {memory_budget}"
            )
        groups[c.id] = grp

    def pair_key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    # live pairwise savings between group representatives; only communicating
    # pairs are merge candidates, so iterate the sparse cost map once
    saving: dict[tuple[int, int], int] = {}
    for (a, b), w in inter_cost.items():
        if w > 0 and a in groups and b in groups:
            saving[pair_key(a, b)] = w

    # max-heap with lazy invalidation: entries stale when the pair's recorded
    # saving changed or either side was merged away
    heap = [(-w, k) for k, w in saving.items()]
    heapq.heapify(heap)
    dead: set[tuple[int, int]] = set()
    pairs_of: dict[int, set[tuple[int, int]]] = {gid: set() for gid in groups}
    for k in saving:
        pairs_of[k[0]].add(k)
        pairs_of[k[1]].add(k)

    while heap:
        neg_w, (a, b) = heapq.heappop(heap)
        w = -neg_w
        if saving.get((a, b)) != w or (a, b) in dead:
            continue
        ga, gb = groups[a], groups[b]
        merged = _Group.__new__(_Group)
        merged.chunk_ids = sorted(ga.chunk_ids + gb.chunk_ids)
        merged.members = ga.members | gb.members
        merged.halo = ga.halo | gb.halo
        merged.edges = ga.edges + gb.edges
        if _group_memory(merged, mem_coeffs) > memory_budget:
            dead.add((a, b))
            continue
        merged.saved = ga.saved + gb.saved + w
        rep = merged.chunk_ids[0]
        del groups[a], groups[b]
        touched = pairs_of.pop(a) | pairs_of.pop(b)
        pairs_of[rep] = set()
        for k in touched:
            other = k[0] if k[1] in (a, b) else k[1]
            w_old = saving.pop(k, 0)
            dead.discard(k)
            if other in (a, b) or w_old == 0:
                continue
            pairs_of[other].discard(k)
            nk = pair_key(rep, other)
            new_w = saving.get(nk, 0) + w_old
            saving[nk] = new_w
            pairs_of[other].add(nk)
            pairs_of[rep].add(nk)
            heapq.heappush(heap, (-new_w, nk))
        groups[rep] = merged

    return [
        FusionGroup(tuple(grp.chunk_ids), _group_memory(grp, mem_coeffs), grp.saved)
        for _, grp in sorted(groups.items())
    ]


def plan_fusion(
    cg: ChunkGraph,
    assignment: Assignment,
    memory_budget: int,
    mem_coeffs: MemCoeffs = MemCoeffs(),
) -> FusionPlan:
    """Spatial-fusion plan for every device of an assignment."""
    by_id = {c.id: c for c in cg.chunks}
    groups_by_device = {
        dev: plan_spatial_fusion(
            [by_id[c] for c in queue], cg.inter_cost, memory_budget, mem_coeffs
        )
        for dev, queue in enumerate(assignment.queues)
    }
    return FusionPlan(groups_by_device, memory_budget)


# -- temporal fusion -------------------------------------------------------------


Slot = tuple[int, int]  # (entity, position within its sequence)


@dataclass
class PackedBatch:
    """Sequences concatenated into fixed-length rows with a carry mask.

    ``rows[r][p]`` is an (entity, position) slot or None for padding.
    ``mask[r][p]`` is 1 iff slot p continues the same sequence as slot p-1;
    it is 0 at row starts, at sequence joins, and on padding slots.
    """

    rows: list[list[Slot | None]]
    row_length: int
    mask: np.ndarray  # (n_rows, row_length) uint8
    padding_count: int
    sequences: list[tuple[int, int]]  # original (entity, length) inputs

    @property
    def n_rows(self) -> int:
        return len(self.rows)


def _ffd_place(lengths: Sequence[int], row_length: int) -> tuple[list[int], list[int]]:
    """Exact first-fit-decreasing placement of lengths into rows of fixed size.

    Returns (row index per input sequence, used slots per row). Sequences with
    equal length are placed in input order. The first-fit scan restarts only
    when the length value drops (rows skipped for a length stay too full for
    every later sequence of the same length), keeping the scan near-linear.
    """
    order = sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))
    row_of = [0] * len(lengths)
    used: list[int] = []
    start = 0
    prev_len: int | None = None
    for i in order:
        length = lengths[i]
        if length != prev_len:
            start = 0
            prev_len = length
        r = start
        while r < len(used) and used[r] + length > row_length:
            r += 1
        start = r
        if r == len(used):
            used.append(0)
        used[r] += length
        row_of[i] = r
    return row_of, used


def pack_sequences(sequences: Sequence[tuple[int, int]]) -> PackedBatch:
    """First-fit-decreasing concatenation of sequences into rows.

    Rows are as long as the longest sequence; shorter sequences fill leftover
    capacity instead of forcing fresh padded rows. Duplicate entity ids are
    rejected since slots are keyed by (entity, position).
    """
    seqs = list(sequences)
    if len({e for e, _ in seqs}) != len(seqs):
        raise ValueError("duplicate entity in sequence list")
    for e, length in seqs:
        if length < 1:
            raise ValueError(f"sequence length must be >= 1, got {length} for {e}")
    if not seqs:
        return PackedBatch([], 0, np.zeros((0, 0), dtype=np.uint8), 0, [])

    row_length = max(length for _, length in seqs)
    row_of, used = _ffd_place([length for _, length in seqs], row_length)

    rows: list[list[Slot | None]] = [[None] * row_length for _ in used]
    fill = [0] * len(used)
    for i in sorted(range(len(seqs)), key=lambda k: (-seqs[k][1], k)):
        entity, length = seqs[i]
        r = row_of[i]
        for p in range(length):
            rows[r][fill[r] + p] = (entity, p)
        fill[r] += length

    mask = np.zeros((len(rows), row_length), dtype=np.uint8)
    for r, row in enumerate(rows):
        for p in range(1, row_length):
            a, b = row[p - 1], row[p]
            if a is not None and b is not None and a[0] == b[0] and b[1] == a[1] + 1:
                mask[r, p] = 1
    padding = sum(row_length - u for u in used)
    return PackedBatch(rows, row_length, mask, padding, seqs)


def packed_padding(lengths: Sequence[int]) -> tuple[int, int]:
    """(packed, naive) padding slot counts for a batch of sequence lengths,
    without materializing rows or masks."""
    if not lengths:
        return 0, 0
    row_length = max(lengths)
    _, used = _ffd_place(lengths, row_length)
    packed = len(used) * row_length - sum(lengths)
    naive = len(lengths) * row_length - sum(lengths)
    return packed, naive


def padding_waste(batch: PackedBatch) -> tuple[int, int]:
    """(packed padding slots, padding slots naive per-sequence padding needs)."""
    naive = sum(batch.row_length - length for _, length in batch.sequences)
    return batch.padding_count, naive


# -- masked GRU reference kernel ----------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class GruCell:
    """Gate parameters of a GRU layer (update, reset, candidate).

    Hidden and input projections use distinct matrices per gate. One step:

        r  = sigmoid(x W_r + h U_r + b_r)
        z  = sigmoid(x W_z + h U_z + b_z)
        c  = tanh(x W_c + (r * h) U_c + b_c)
        h' = (1 - z) * c + z * h
    """

    w_update: np.ndarray
    u_update: np.ndarray
    b_update: np.ndarray
    w_reset: np.ndarray
    u_reset: np.ndarray
    b_reset: np.ndarray
    w_cand: np.ndarray
    u_cand: np.ndarray
    b_cand: np.ndarray

    def __post_init__(self):
        n_in, n_hid = self.w_update.shape
        for m in (self.w_reset, self.w_cand):
            if m.shape != (n_in, n_hid):
                raise ValueError("inconsistent input projection shapes")
        for m in (self.u_update, self.u_reset, self.u_cand):
            if m.shape != (n_hid, n_hid):
                raise ValueError("inconsistent hidden projection shapes")
        for b in (self.b_update, self.b_reset, self.b_cand):
            if b.shape != (n_hid,):
                raise ValueError("inconsistent bias shapes")
        if not all(
            np.isfinite(m).all()
            for m in (
                self.w_update, self.u_update, self.b_update,
                self.w_reset, self.u_reset, self.b_reset,
                self.w_cand, self.u_cand, self.b_cand,
            )
        ):
            raise ValueError("GRU parameters must be finite")

    @property
    def input_size(self) -> int:
        return self.w_update.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_update.shape[1]

    @classmethod
    def random(cls, input_size: int, hidden_size: int, seed: int = 0) -> "GruCell":
        rng = np.random.default_rng(seed)
        s_in = 1.0 / math.sqrt(input_size)
        s_hid = 1.0 / math.sqrt(hidden_size)

        def w():
            return rng.uniform(-s_in, s_in, size=(input_size, hidden_size))

        def u():
            return rng.uniform(-s_hid, s_hid, size=(hidden_size, hidden_size))

        def b():
            return rng.uniform(-s_hid, s_hid, size=hidden_size)

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b())

    def step(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        r = _sigmoid(x @ self.w_reset + h @ self.u_reset + self.b_reset)
        z = _sigmoid(x @ self.w_update + h @ self.u_update + self.b_update)
        c = np.tanh(x @ self.w_cand + (r * h) @ self.u_cand + self.b_cand)
        return (1.0 - z) * c + z * h


def gru_forward(cell: GruCell, xs: np.ndarray) -> np.ndarray:
    """Unfused reference: one sequence (L, input) -> hidden states (L, hidden)."""
    if xs.ndim != 2 or xs.shape[1] != cell.input_size:
        raise ValueError(f"expected (L, {cell.input_size}) inputs, got {xs.shape}")
    h = np.zeros((1, cell.hidden_size))
    out = np.empty((len(xs), cell.hidden_size))
    for p in range(len(xs)):
        h = cell.step(xs[p : p + 1], h)
        out[p] = h[0]
    return out


def gru_forward_masked(
    cell: GruCell,
    batch: PackedBatch,
    inputs: Mapping[int, np.ndarray],
) -> dict[int, np.ndarray]:
    """Run the GRU over a packed batch, masking carries at sequence joins.

    ``inputs[entity]`` holds that sequence's (length, input_size) features.
    Before each step the incoming hidden state is multiplied by the carry
    mask, so slots opening a sequence (and slots after padding) start from a
    zero state. Outputs for padding slots are dropped; the result maps each
    entity to its (length, hidden_size) states.
    """
    for e, length in batch.sequences:
        feats = inputs.get(e)
        if feats is None or feats.shape != (length, cell.input_size):
            raise ValueError(
                f"inputs for entity {e} must have shape ({length}, {cell.input_size})"
            )
    if not batch.rows:
        return {}

    n_rows, L = batch.n_rows, batch.row_length
    X = np.zeros((n_rows, L, cell.input_size))
    for r, row in enumerate(batch.rows):
        for p, slot in enumerate(row):
            if slot is not None:
                X[r, p] = inputs[slot[0]][slot[1]]

    h = np.zeros((n_rows, cell.hidden_size))
    H = np.empty((n_rows, L, cell.hidden_size))
    for p in range(L):
        h = h * batch.mask[:, p : p + 1]
        h = cell.step(X[:, p], h)
        H[:, p] = h

    out = {e: np.empty((length, cell.hidden_size)) for e, length in batch.sequences}
    for r, row in enumerate(batch.rows):
        for p, slot in enumerate(row):
            if slot is not None:
                out[slot[0]][slot[1]] = H[r, p]
    return out
