"""Cluster-head packet buffers.

One FIFO queue per cluster, sized in packets.  Entries are slot-groups of
Ms packets: the XOR payload bits plus genie copies of both sources' bits
(used only for end-to-end error scoring, invisible to selection and
detection) and the slot the group was stored in.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class BufferContractError(RuntimeError):
    """Raised on store/extract calls that violate the occupancy contract.

    Eligibility filtering upstream makes these unreachable; hitting one is
    an engine bug, not a statistical event.
    """


@dataclass
class PacketGroup:
    """Ms packets buffered together: (Ms, T) bit blocks plus ground truth."""

    payload: np.ndarray
    truth_x1: np.ndarray
    truth_x2: np.ndarray
    birth_slot: int


@dataclass(frozen=True)
class BufferSummary:
    occupancy: np.ndarray   # packets per cluster
    total: int              # N_p
    fullest: int            # argmax occupancy, lowest index on ties
    capacity: int           # J
    group_size: int         # Ms


class BufferBank:
    """K cluster buffers of J packets each, filled and drained Ms at a time."""

    def __init__(self, clusters: int, capacity: int, group_size: int):
        if clusters < 1:
            raise ValueError("need at least one cluster")
        if capacity % group_size:
            raise ValueError("buffer size J must be a multiple of Ms")
        if capacity < group_size:
            raise ValueError("buffer size J must hold at least one group of Ms packets")
        self.capacity = capacity
        self.group_size = group_size
        self._queues = [deque() for _ in range(clusters)]

    def occupancy(self, cluster: int) -> int:
        return len(self._queues[cluster]) * self.group_size

    def store(self, cluster: int, group: PacketGroup, slot: int) -> int:
        if self.occupancy(cluster) + self.group_size > self.capacity:
            raise BufferContractError(
                f"store would overflow cluster {cluster} buffer "
                f"({self.occupancy(cluster)}+{self.group_size} > {self.capacity})")
        if group.payload.shape[0] != self.group_size:
            raise BufferContractError("group does not hold Ms packets")
        group.birth_slot = slot
        self._queues[cluster].append(group)
        return self.occupancy(cluster)

    def extract(self, cluster: int, slot: int) -> tuple:
        """Pop the oldest group; returns (group, per-packet delays in slots)."""
        if self.occupancy(cluster) < self.group_size:
            raise BufferContractError(
                f"extract from cluster {cluster} with occupancy "
                f"{self.occupancy(cluster)} < {self.group_size}")
        group = self._queues[cluster].popleft()
        delay = slot - group.birth_slot
        return group, np.full(self.group_size, delay, dtype=np.int64)

    def summary(self) -> BufferSummary:
        occ = np.array([len(q) * self.group_size for q in self._queues])
        return BufferSummary(
            occupancy=occ,
            total=int(occ.sum()),
            fullest=int(np.argmax(occ)),
            capacity=self.capacity,
            group_size=self.group_size,
        )
