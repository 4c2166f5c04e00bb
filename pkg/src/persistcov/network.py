"""In-process communication layer.

Two channels are simulated. The fast channel hands every agent the current
pose and ADF parameters of its neighbours each control step. The slow
channel runs the two-round estimate exchange at update instants, as a
synchronous barrier: every message of a round is published before any
agent consumes one.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .descriptor import DescriptorSpec, Pose
from .estimation import (
    EstimatorState,
    UpdateMessage,
    compute_overlap,
    correction_round1,
    correction_round2,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommsConfig:
    R_com: float
    T: float

    def __post_init__(self):
        if not (self.R_com > 0 and self.T > 0):
            raise ValueError("R_com and T must be positive")

    def check_footprint(self, r_cov_max: float) -> bool:
        """Warn when agents with overlapping footprints may not be neighbours."""
        ok = self.R_com > 2.0 * r_cov_max
        if not ok:
            log.warning("R_com = %g <= 2 * r_cov = %g: overlapping agents may not communicate",
                        self.R_com, 2.0 * r_cov_max)
        return ok


@dataclass(frozen=True)
class ProximityGraph:
    adjacency: tuple  # adjacency[i] is a frozenset of neighbour ids

    @classmethod
    def from_poses(cls, poses: Sequence[Pose], R_com: float) -> "ProximityGraph":
        n = len(poses)
        adj = [set() for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if math.hypot(poses[i].x - poses[j].x, poses[i].y - poses[j].y) <= R_com:
                    adj[i].add(j)
                    adj[j].add(i)
        return cls(tuple(frozenset(a) for a in adj))

    @property
    def size(self) -> int:
        return len(self.adjacency)


def neighbors(graph: ProximityGraph, i: int) -> frozenset:
    if not 0 <= i < graph.size:
        raise KeyError(f"unknown agent id {i}")
    return graph.adjacency[i]


def connectivity_check(graph: ProximityGraph) -> bool:
    if graph.size <= 1:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        for j in graph.adjacency[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == graph.size


@dataclass(frozen=True)
class NeighborInfo:
    agent_id: int
    pose: Pose
    spec: DescriptorSpec


def exchange_fast(poses: Sequence[Pose], specs: Sequence[DescriptorSpec],
                  graph: ProximityGraph) -> list[list[NeighborInfo]]:
    """Per-agent view of the neighbours' poses and ADF parameters, sorted by
    id. Poses and specs are immutable, so the view is a snapshot."""
    return [
        [NeighborInfo(j, poses[j], specs[j]) for j in sorted(graph.adjacency[i])]
        for i in range(graph.size)
    ]


@dataclass
class ExchangeStats:
    messages: int = 0
    bytes: int = 0


def exchange_estimates(estimators: Sequence[EstimatorState], graph: ProximityGraph, t_k: float,
                       delta: float, stats: ExchangeStats | None = None,
                       T: float | None = None) -> list[EstimatorState]:
    """Run both correction rounds for every agent and return new estimators.

    ``T`` is the update period; by default each agent uses the time since its
    own previous update. Passing the configured period keeps the snapshot
    decay factor bit-identical to the one the field integrator uses.
    """
    n = len(estimators)
    # round 1: publish snapshots, then correct
    snapshots = [UpdateMessage(i, est.I_hat) for i, est in enumerate(estimators)]
    I_minus, overlaps = [], []
    for i, est in enumerate(estimators):
        T_i = t_k - est.t_last if T is None else T
        inbox = [snapshots[j] for j in sorted(graph.adjacency[i])]
        I_minus.append(correction_round1(est, inbox, delta, T_i))
        overlaps.append(compute_overlap(est, inbox, delta, T_i))
    # round 2: publish overlaps, then correct
    round2 = [UpdateMessage(i, snapshots[i].I_hat_snapshot, overlaps[i]) for i in range(n)]
    out = []
    for i, est in enumerate(estimators):
        inbox = [round2[j] for j in sorted(graph.adjacency[i])]
        out.append(correction_round2(est, I_minus[i], inbox, t_k))
        if stats is not None:
            stats.messages += 2 * len(inbox)
            stats.bytes += sum(m.I_hat_snapshot.values.nbytes + m.d_tilde_o.values.nbytes for m in inbox)
    return out
