"""Load balancing through replication: replica cleanup, availability-driven
copies for departing peers, intra-cluster pairing, inter-cluster shedding.

All functions here are pure decisions over snapshots; the simulation kernel
applies the returned moves.  Loads are request-bytes served per reporting
period.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .clustering import Cluster
from .errors import ConfigurationError
from .placement import ReplicaStore
from .topology import PeerNode


@dataclass(frozen=True)
class LoadReport:
    peer: int
    load: float       # request-bytes served over the period
    disk_free: float


@dataclass(frozen=True)
class HotItemList:
    """Content ids ordered hottest-first (descending window access count)."""

    items: tuple[str, ...]

    @classmethod
    def from_counts(cls, counts: Mapping[str, int], limit: int | None = None) -> "HotItemList":
        ranked = sorted(
            (cid for cid, n in counts.items() if n > 0),
            key=lambda cid: (-counts[cid], cid))
        if limit is not None:
            ranked = ranked[:limit]
        return cls(items=tuple(ranked))


class MoveReason(str, enum.Enum):
    INTRA = "IntraBalance"
    INTER = "InterBalance"
    AVAILABILITY = "Availability"


@dataclass(frozen=True)
class ReplicationMove:
    item: str
    source: int
    target: int
    reason: MoveReason
    source_load: float = 0.0
    target_load: float = 0.0


@dataclass(frozen=True)
class BalancingConfig:
    s_th: float = 4_000.0                  # disk-space floor for move targets
    load_diff_threshold: float = 4_000.0   # request-bytes gap that triggers a pair move
    alpha_cleanup: int = 1                 # window accesses below this get a replica deleted
    report_period_ms: float = 1_000.0
    imbalance_fraction: float = 0.10
    departure_prob_threshold: float = 0.5
    hot_list_size: int = 8                 # hot items considered per inter-cluster round
    cleanup_every: int = 4                 # cleanup runs on every k-th tick

    def validate(self) -> None:
        if self.s_th <= 0:
            raise ConfigurationError("balancing.s_th must be positive")
        if self.load_diff_threshold <= 0:
            raise ConfigurationError("balancing.load_diff_threshold must be positive")
        if self.alpha_cleanup < 1:
            raise ConfigurationError("balancing.alpha_cleanup must be at least 1")
        if self.report_period_ms <= 0:
            raise ConfigurationError("balancing.report_period_ms must be positive")
        if not 0.0 < self.imbalance_fraction < 1.0:
            raise ConfigurationError("balancing.imbalance_fraction must lie in (0, 1)")
        if not 0.0 < self.departure_prob_threshold <= 1.0:
            raise ConfigurationError("balancing.departure_prob_threshold must lie in (0, 1]")
        if self.hot_list_size < 1:
            raise ConfigurationError("balancing.hot_list_size must be at least 1")
        if self.cleanup_every < 1:
            raise ConfigurationError("balancing.cleanup_every must be at least 1")


@dataclass(frozen=True)
class ClusterSnapshot:
    """A leader's view of its cluster at reporting time."""

    cluster_id: str
    members: tuple[int, ...]
    loads: Mapping[int, float]
    disk_free: Mapping[int, float]

    @property
    def total_load(self) -> float:
        return sum(self.loads.values())


def compute_cluster_load(reports: Iterable[LoadReport]) -> float:
    """Sum of member loads for the period; the quantity leaders exchange."""
    return sum(r.load for r in reports)


def cleanup_replicas(store: ReplicaStore, peer_id: int, alpha_cleanup: int) -> list[str]:
    """Delete this peer's cold replicas and reset its window counters.

    A replica is cold when its window access count is strictly below the
    threshold.  Origin copies are never deleted, whatever their count, and
    a copy placed after the window opened is skipped once: it has not been
    observable for a full interval yet.
    """
    doomed = []
    for cid, copy in store.copies_at(peer_id).items():
        if not copy.complete or copy.is_origin:
            continue
        if copy.fresh:
            copy.fresh = False
            continue
        if copy.window_hits < alpha_cleanup:
            doomed.append(cid)
    for cid in sorted(doomed):
        store.discard(peer_id, cid)
    store.reset_window(peer_id)
    return sorted(doomed)


def _fits(target: int, item: str, store: ReplicaStore, peers: Mapping[int, PeerNode],
          item_sizes: Mapping[str, int], free: Mapping[int, float],
          slots: Mapping[int, int]) -> bool:
    return (
        not store.has(target, item)
        and free[target] >= item_sizes[item]
        and slots[target] > 0
    )


def _ledgers(members: Iterable[int], store: ReplicaStore,
             peers: Mapping[int, PeerNode],
             disk_free: Mapping[int, float]) -> tuple[dict[int, float], dict[int, int]]:
    free = {m: disk_free[m] for m in members}
    slots = {m: peers[m].replica_slots - store.replica_count(m) for m in members}
    return free, slots


def intra_cluster_balance(reports: Sequence[LoadReport],
                          hot_per_peer: Mapping[int, HotItemList],
                          cfg: BalancingConfig, store: ReplicaStore,
                          peers: Mapping[int, PeerNode],
                          item_sizes: Mapping[str, int]) -> list[ReplicationMove]:
    """Pair heavy peers with light ones and replicate one hot item per pair.

    Steps: sort members by load descending; among the last floor(n/2)
    entries drop those whose reported free disk is below the floor; pair
    first with last, second with second-last, and so on; a pair whose load
    gap strictly exceeds the threshold replicates the heavy peer's own
    hottest item to the light peer.
    """
    ordered = sorted(reports, key=lambda r: (-r.load, r.peer))
    n = len(ordered)
    if n < 2:
        return []
    cut = n - n // 2
    survivors = ordered[:cut] + [r for r in ordered[cut:] if r.disk_free >= cfg.s_th]
    m = len(survivors)
    if m < 2:
        return []

    disk_free = {r.peer: r.disk_free for r in survivors}
    free, slots = _ledgers(disk_free, store, peers, disk_free)
    moves: list[ReplicationMove] = []
    for i in range(m // 2):
        heavy, light = survivors[i], survivors[m - 1 - i]
        if heavy.load - light.load <= cfg.load_diff_threshold:
            continue
        hot = hot_per_peer.get(heavy.peer)
        if hot is None or not hot.items:
            continue
        item = hot.items[0]
        if not _fits(light.peer, item, store, peers, item_sizes, free, slots):
            continue
        free[light.peer] -= item_sizes[item]
        slots[light.peer] -= 1
        moves.append(ReplicationMove(
            item=item, source=heavy.peer, target=light.peer,
            reason=MoveReason.INTRA,
            source_load=heavy.load, target_load=light.load))
    return moves


def availability_replicate(cluster: Cluster, departure_probs: Mapping[int, float],
                           hot: HotItemList, loads: Mapping[int, float],
                           disk_free: Mapping[int, float], store: ReplicaStore,
                           peers: Mapping[int, PeerNode],
                           item_sizes: Mapping[str, int],
                           cfg: BalancingConfig) -> list[ReplicationMove]:
    """Copy hot items off peers that look likely to leave.

    For each member at or above the departure-probability threshold, every
    hot item it hosts gets one extra copy on the lowest-loaded member with
    room, unless some other member already holds it.
    """
    members = [m for m in cluster.members if m in loads]
    free, slots = _ledgers(members, store, peers, disk_free)
    moves: list[ReplicationMove] = []
    for risky in sorted(members):
        if departure_probs.get(risky, 0.0) < cfg.departure_prob_threshold:
            continue
        for item in hot.items:
            if not store.has(risky, item):
                continue
            if any(store.has(m, item) for m in members if m != risky):
                continue
            candidates = [
                m for m in members
                if m != risky and _fits(m, item, store, peers, item_sizes, free, slots)
            ]
            if not candidates:
                continue
            target = min(candidates, key=lambda m: (loads[m], m))
            free[target] -= item_sizes[item]
            slots[target] -= 1
            moves.append(ReplicationMove(
                item=item, source=risky, target=target,
                reason=MoveReason.AVAILABILITY,
                source_load=loads[risky], target_load=loads[target]))
    return moves


def inter_cluster_balance(self_snap: ClusterSnapshot,
                          neighbor_snaps: Sequence[ClusterSnapshot],
                          hot: HotItemList, item_sizes: Mapping[str, int],
                          cfg: BalancingConfig) -> list[tuple[str, str]]:
    """Assign an overloaded cluster's hot items to willing neighbor leaders.

    Triggers only when this cluster's load exceeds the neighbors' average
    by strictly more than the imbalance fraction of that average.  A member
    is willing when its free disk strictly exceeds the smallest hot item;
    a leader is willing when any member is.  Willing leaders, sorted by
    ascending total willing load, receive the hot items round-robin: with
    fewer leaders than items the assignment wraps until every item is
    placed, otherwise only the first m leaders get one item each.
    """
    if not neighbor_snaps or not hot.items:
        return []
    w_k = self_snap.total_load
    w_avg = sum(s.total_load for s in neighbor_snaps) / len(neighbor_snaps)
    if not (w_k - w_avg) > w_avg * cfg.imbalance_fraction:
        return []

    min_size = min(item_sizes[i] for i in hot.items)
    willing: list[tuple[float, float, str]] = []  # (sum load, sum disk, cluster id)
    for snap in neighbor_snaps:
        members = [m for m in snap.members if snap.disk_free.get(m, 0.0) > min_size]
        if not members:
            continue
        willing.append((
            sum(snap.loads.get(m, 0.0) for m in members),
            sum(snap.disk_free[m] for m in members),
            snap.cluster_id,
        ))
    if not willing:
        return []
    willing.sort(key=lambda w: (w[0], w[2]))
    order = [cid for _, _, cid in willing]
    return [(item, order[i % len(order)]) for i, item in enumerate(hot.items)]


def plan_inter_moves(assignment: Sequence[tuple[str, str]],
                     self_snap: ClusterSnapshot,
                     neighbor_snaps: Mapping[str, ClusterSnapshot],
                     store: ReplicaStore, peers: Mapping[int, PeerNode],
                     item_sizes: Mapping[str, int]) -> list[ReplicationMove]:
    """Turn an inter-cluster assignment into concrete moves.

    The source is the most-loaded member of the overloaded cluster hosting
    the item.  Inside the receiving cluster, items land on the lightest
    member first, disk permitting; each tentative placement counts toward
    that member's load so consecutive items spread out.
    """
    free: dict[int, float] = {}
    slots: dict[int, int] = {}
    tentative_load: dict[int, float] = {}
    for snap in neighbor_snaps.values():
        f, s = _ledgers(snap.members, store, peers, snap.disk_free)
        free.update(f)
        slots.update(s)
        tentative_load.update({m: snap.loads.get(m, 0.0) for m in snap.members})

    moves: list[ReplicationMove] = []
    for item, cluster_id in assignment:
        snap = neighbor_snaps[cluster_id]
        sources = [m for m in self_snap.members if store.has(m, item, include_pending=False)]
        if not sources:
            continue
        source = max(sources, key=lambda m: (self_snap.loads.get(m, 0.0), -m))
        candidates = [
            m for m in snap.members
            if _fits(m, item, store, peers, item_sizes, free, slots)
        ]
        if not candidates:
            continue
        target = min(candidates, key=lambda m: (tentative_load[m], m))
        free[target] -= item_sizes[item]
        slots[target] -= 1
        tentative_load[target] += item_sizes[item]
        moves.append(ReplicationMove(
            item=item, source=source, target=target, reason=MoveReason.INTER,
            source_load=self_snap.loads.get(source, 0.0),
            target_load=snap.loads.get(target, 0.0)))
    return moves
