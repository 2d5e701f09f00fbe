"""Node weighting, strong/weak partitioning, cluster formation, leader election.

A peer's weight is (bandwidth + cpu + memory) / access-latency over the
normalized attributes.  Peers at or above the weight threshold form the
strong set, the rest the weak set; each set is chunked in weight order into
bounded clusters labelled "S" or "W".
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .topology import Topology


@dataclass(frozen=True)
class NodeWeight:
    peer: int
    value: float


@dataclass(frozen=True)
class Partition:
    """Strong/weak split plus the descending weight vector it came from."""

    strong: tuple[int, ...]
    weak: tuple[int, ...]
    weight_vector: tuple[NodeWeight, ...]


@dataclass
class Cluster:
    cluster_id: str
    label: str  # "S" or "W"
    members: list[int]
    leader: int
    neighbors: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ClusteringConfig:
    """``beta_weight`` of None means: use the median fleet weight."""

    beta_weight: float | None = None
    max_cluster_size: int = 10

    def validate(self) -> None:
        if self.beta_weight is not None and self.beta_weight <= 0:
            raise ConfigurationError("clustering.beta_weight must be positive")
        if self.max_cluster_size < 1:
            raise ConfigurationError("clustering.max_cluster_size must be at least 1")


def compute_weight(bw: float, sp: float, mz: float, al: float) -> float:
    """Node weight: (bw + sp + mz) / al, all inputs normalized to (0, 1]."""
    if al <= 0:
        raise ValueError("access latency must be positive")
    return (bw + sp + mz) / al


def node_weights(t: Topology) -> list[NodeWeight]:
    """Weights for every peer, in ascending peer-id order."""
    return [
        NodeWeight(pid, compute_weight(p.up_bw, p.cpu, p.mem, p.access_latency))
        for pid, p in sorted(t.peers.items())
    ]


def default_beta(weights: list[NodeWeight]) -> float:
    """Median fleet weight; splits an arbitrary fleet roughly in half."""
    if not weights:
        raise ValueError("cannot derive a threshold from zero weights")
    return statistics.median(w.value for w in weights)


def partition_nodes(weights: list[NodeWeight], beta_weight: float) -> Partition:
    """Split peers into strong (weight >= threshold) and weak (the rest).

    The weight vector is sorted by descending weight with ascending peer id
    as the tie-break, so the result is independent of input order.
    """
    if not weights:
        raise ValueError("weights must be non-empty")
    ordered = tuple(sorted(weights, key=lambda w: (-w.value, w.peer)))
    strong = tuple(w.peer for w in ordered if w.value >= beta_weight)
    weak = tuple(w.peer for w in ordered if w.value < beta_weight)
    return Partition(strong=strong, weak=weak, weight_vector=ordered)


def form_clusters(p: Partition, max_cluster_size: int) -> list[Cluster]:
    """Chunk each set in weight order into clusters of bounded size.

    The first member of a chunk is its highest-weight peer (lowest id on
    ties), which is exactly the leader election rule, so leaders are filled
    in directly.  All same-label clusters are mutual neighbors.
    """
    if max_cluster_size < 1:
        raise ConfigurationError("max_cluster_size must be at least 1")
    clusters: list[Cluster] = []
    for label, members in (("S", p.strong), ("W", p.weak)):
        chunks = [
            list(members[i:i + max_cluster_size])
            for i in range(0, len(members), max_cluster_size)
        ]
        group = [
            Cluster(cluster_id=f"{label}{idx}", label=label,
                    members=chunk, leader=chunk[0])
            for idx, chunk in enumerate(chunks)
        ]
        for c in group:
            c.neighbors = [o.cluster_id for o in group if o.cluster_id != c.cluster_id]
        clusters.extend(group)
    return clusters


def elect_leader(c: Cluster, weights: list[NodeWeight]) -> int:
    """Highest-weight member; ties broken by lowest peer id."""
    if not c.members:
        raise ValueError(f"cluster {c.cluster_id} has no members")
    by_peer = {w.peer: w.value for w in weights}
    return min(c.members, key=lambda pid: (-by_peer[pid], pid))


def build_clusters(t: Topology, cfg: ClusteringConfig) -> tuple[list[Cluster], Partition]:
    """Weights -> threshold -> partition -> clusters, in one shot."""
    cfg.validate()
    weights = node_weights(t)
    beta = cfg.beta_weight if cfg.beta_weight is not None else default_beta(weights)
    part = partition_nodes(weights, beta)
    return form_clusters(part, cfg.max_cluster_size), part
