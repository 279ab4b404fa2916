"""Greedy score-driven assignment of chunks to devices.

Chunks are placed in decreasing predicted-workload order. For each chunk the
per-device score is

    score = (mean_workload - load_already_on_device) * affinity_to_device

where affinity is the summed inter-chunk communication cost to chunks already
living there. The device with the highest score wins; ties break to the least
loaded device, then the lowest device id (which also handles the all-zero
bootstrap when every device is empty). The mean workload is fixed up front
and not updated as chunks land.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .partition import ChunkGraph

__all__ = ["Assignment", "assign", "assignment_score", "lambda_divergence"]


@dataclass
class Assignment:
    device_of: dict[int, int]
    queues: list[list[int]]
    loads: list[float]
    mean_workload: float

    @property
    def n_devices(self) -> int:
        return len(self.queues)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "mean_workload": self.mean_workload,
            "queues": [list(q) for q in self.queues],
        }

    @classmethod
    def from_dict(cls, doc: dict, workloads: Mapping[int, float] | None = None) -> "Assignment":
        queues = [list(q) for q in doc["queues"]]
        device_of = {c: d for d, q in enumerate(queues) for c in q}
        loads = [
            sum(workloads.get(c, 0.0) for c in q) if workloads else 0.0 for q in queues
        ]
        return cls(device_of, queues, loads, doc["mean_workload"])


def assignment_score(mean_workload: float, device_load: float, affinity: float) -> float:
    """The balance-times-affinity score of placing a chunk on one device."""
    return (mean_workload - device_load) * affinity


def assign(cg: ChunkGraph, workloads: Mapping[int, float], n_devices: int) -> Assignment:
    """Place every chunk on a device, largest predicted workload first."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    for c in cg.chunks:
        if workloads.get(c.id, 0.0) < 0:
            raise ValueError(f"negative workload for chunk {c.id}")

    order = sorted(cg.chunks, key=lambda c: (-workloads.get(c.id, 0.0), c.id))
    mean_w = sum(workloads.get(c.id, 0.0) for c in cg.chunks) / n_devices

    device_of: dict[int, int] = {}
    queues: list[list[int]] = [[] for _ in range(n_devices)]
    loads = [0.0] * n_devices
    # affinity[c][m]: cost between chunk c and chunks already on device m
    affinity: dict[int, list[float]] = {}

    for chunk in order:
        aff = affinity.get(chunk.id)
        best_dev = 0
        best_score = None
        for m in range(n_devices):
            s = assignment_score(mean_w, loads[m], aff[m] if aff else 0.0)
            if (
                best_score is None
                or s > best_score
                or (s == best_score and loads[m] < loads[best_dev])
            ):
                best_score = s
                best_dev = m
        device_of[chunk.id] = best_dev
        queues[best_dev].append(chunk.id)
        loads[best_dev] += workloads.get(chunk.id, 0.0)
        for other, w in cg.neighbors(chunk.id):
            if other not in device_of:
                affinity.setdefault(other, [0.0] * n_devices)[best_dev] += w

    return Assignment(device_of, queues, loads, mean_w)


def lambda_divergence(per_device_time: Sequence[float]) -> float:
    """Load-divergence: max over min of per-device epoch times (1.0 = balanced)."""
    if not per_device_time:
        raise ValueError("need at least one device time")
    if min(per_device_time) <= 0:
        raise ValueError("device times must be > 0")
    return max(per_device_time) / min(per_device_time)
