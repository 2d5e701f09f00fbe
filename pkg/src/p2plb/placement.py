"""Replica placement pipeline: query registration, classification, planning,
execution, announcements, and hierarchical query routing.

Content with a window access count at or above the threshold is class 1 and
replicated onto strong-cluster peers; everything else is class 2 and goes to
weak-cluster peers.  Queries route to strong-cluster copies first, then weak,
then the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .clustering import Cluster
from .errors import ConfigurationError, RoutingError, SimulationError, UnknownContentError
from .topology import PeerNode, Topology, e2e_delay, transfer_time

CLASS1 = "class1"
CLASS2 = "class2"
UNCLASSIFIED = "unclassified"


@dataclass
class ContentItem:
    content_id: str
    origin_peer: int
    size: int
    class_label: str = UNCLASSIFIED
    access_count_window: int = 0


@dataclass(frozen=True)
class QueryRecord:
    nid: int
    ckwd: str
    time: float  # simulation ms


@dataclass(frozen=True)
class PlacementConfig:
    a_min: int = 5
    copies_class1: int = 3
    copies_class2: int = 1

    def validate(self) -> None:
        if self.a_min < 1:
            raise ConfigurationError("placement.a_min must be at least 1")
        if self.copies_class2 < 0 or self.copies_class1 < self.copies_class2:
            raise ConfigurationError(
                "placement copy counts must satisfy copies_class1 >= copies_class2 >= 0")


@dataclass(frozen=True)
class ReplicationAnnouncement:
    """Broadcast entry: {node id, cluster label, every content id it hosts}."""

    nid: int
    clid: str
    contents: tuple[str, ...]


@dataclass
class PlacementPlan:
    assignments: dict[str, list[int]]
    class_map: dict[str, str]
    shortfalls: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class PlacementTransfer:
    """One origin-to-target copy produced by executing a plan."""

    content_id: str
    source: int
    target: int
    nbytes: int
    duration_ms: float


class QueryServer:
    """Central registry of client queries and of each peer's cluster.

    The catalog maps content ids to their items; the cluster table maps
    every peer to its (label, cluster id) pair.
    """

    def __init__(self, catalog: Mapping[str, ContentItem],
                 cluster_table: Mapping[int, tuple[str, str]]):
        self.catalog = dict(catalog)
        self.cluster_table = dict(cluster_table)
        self.log: list[QueryRecord] = []

    def label_of(self, peer_id: int) -> str:
        return self.cluster_table[peer_id][0]

    def reset_window(self) -> None:
        for item in self.catalog.values():
            item.access_count_window = 0


def register_query(qs: QueryServer, q: QueryRecord) -> None:
    """Log a query and bump the content's window counter.

    Unknown keywords are rejected without touching the log; the caller
    counts the miss.
    """
    item = qs.catalog.get(q.ckwd)
    if item is None:
        raise UnknownContentError(q.ckwd)
    qs.log.append(q)
    item.access_count_window += 1


def classify_content(qs: QueryServer, a_min: int) -> dict[str, str]:
    """Label every catalog item by its window access count.

    Count >= a_min means class 1; everything else, including never-queried
    items, is class 2.  Labels are written back onto the items and also
    returned as a map.
    """
    class_map: dict[str, str] = {}
    for cid in sorted(qs.catalog):
        item = qs.catalog[cid]
        item.class_label = CLASS1 if item.access_count_window >= a_min else CLASS2
        class_map[cid] = item.class_label
    return class_map


@dataclass
class _StoredCopy:
    content_id: str
    is_origin: bool
    node_weight: float
    complete: bool
    window_hits: int = 0
    # Copies younger than one full access window have no meaningful window
    # count yet; cleanup skips them once and then treats them normally.
    fresh: bool = True


class ReplicaStore:
    """Who hosts what, with disk and replica-slot bookkeeping.

    Placing a copy debits the hosting peer's ``disk_free``; removing it
    credits it back.  Pending (in-flight) copies occupy disk and slots but
    are invisible to routing until finalized.
    """

    def __init__(self, peers: Mapping[int, PeerNode], catalog: Mapping[str, ContentItem]):
        self._peers = peers
        self._catalog = catalog
        self._by_peer: dict[int, dict[str, _StoredCopy]] = {pid: {} for pid in peers}

    def copies_at(self, peer_id: int) -> dict[str, _StoredCopy]:
        return self._by_peer[peer_id]

    def items_at(self, peer_id: int, include_pending: bool = False) -> list[str]:
        return sorted(
            cid for cid, c in self._by_peer[peer_id].items()
            if include_pending or c.complete
        )

    def hosts(self, content_id: str, include_pending: bool = False) -> list[int]:
        out = []
        for pid in sorted(self._by_peer):
            copy = self._by_peer[pid].get(content_id)
            if copy is not None and (include_pending or copy.complete):
                out.append(pid)
        return out

    def has(self, peer_id: int, content_id: str, include_pending: bool = True) -> bool:
        copy = self._by_peer[peer_id].get(content_id)
        return copy is not None and (include_pending or copy.complete)

    def replica_count(self, peer_id: int) -> int:
        """Non-origin copies, pending included (they hold a slot)."""
        return sum(1 for c in self._by_peer[peer_id].values() if not c.is_origin)

    def can_accept(self, peer_id: int, content_id: str) -> bool:
        """Disk, slot, and no-duplicate check for one more replica."""
        peer = self._peers[peer_id]
        item = self._catalog[content_id]
        return (
            not self.has(peer_id, content_id)
            and peer.disk_free >= item.size
            and self.replica_count(peer_id) < peer.replica_slots
        )

    def place(self, peer_id: int, content_id: str, node_weight: float,
              *, origin: bool = False, complete: bool = True) -> None:
        peer = self._peers[peer_id]
        item = self._catalog[content_id]
        if self.has(peer_id, content_id):
            raise SimulationError(f"peer {peer_id} already hosts {content_id}")
        if peer.disk_free < item.size:
            raise SimulationError(f"peer {peer_id} out of disk for {content_id}")
        if not origin and self.replica_count(peer_id) >= peer.replica_slots:
            raise SimulationError(f"peer {peer_id} out of replica slots")
        peer.disk_free -= item.size
        self._by_peer[peer_id][content_id] = _StoredCopy(
            content_id=content_id, is_origin=origin,
            node_weight=node_weight, complete=complete)

    def finalize(self, peer_id: int, content_id: str) -> None:
        self._by_peer[peer_id][content_id].complete = True

    def discard(self, peer_id: int, content_id: str) -> int:
        """Drop one copy and return the bytes credited back to disk."""
        copy = self._by_peer[peer_id].pop(content_id)
        size = self._catalog[copy.content_id].size
        self._peers[peer_id].disk_free += size
        return size

    def drop_replicas(self, peer_id: int) -> list[str]:
        """Remove every non-origin copy at a peer (departure semantics)."""
        dropped = [cid for cid, c in self._by_peer[peer_id].items() if not c.is_origin]
        for cid in dropped:
            self.discard(peer_id, cid)
        return sorted(dropped)

    def record_access(self, peer_id: int, content_id: str) -> None:
        copy = self._by_peer[peer_id].get(content_id)
        if copy is not None:
            copy.window_hits += 1

    def window_counts(self, peer_id: int) -> dict[str, int]:
        return {cid: c.window_hits for cid, c in self._by_peer[peer_id].items() if c.complete}

    def reset_window(self, peer_id: int) -> None:
        for copy in self._by_peer[peer_id].values():
            copy.window_hits = 0

    def used_bytes(self, peer_id: int) -> int:
        return sum(self._catalog[cid].size for cid in self._by_peer[peer_id])


def plan_placement(class_map: Mapping[str, str], clusters: Iterable[Cluster],
                   peers: Mapping[int, PeerNode], weights: Mapping[int, float],
                   store: ReplicaStore, cfg: PlacementConfig) -> PlacementPlan:
    """Pick replica targets for every classified item.

    Class 1 items get ``copies_class1`` strong-cluster targets, class 2
    items ``copies_class2`` weak-cluster targets, chosen in descending node
    weight, skipping the origin peer and peers without disk or slots.
    Shortfalls are recorded, never fatal.
    """
    strong = [m for c in clusters if c.label == "S" for m in c.members]
    weak = [m for c in clusters if c.label == "W" for m in c.members]
    strong.sort(key=lambda pid: (-weights[pid], pid))
    weak.sort(key=lambda pid: (-weights[pid], pid))

    # Tentative disk/slot ledger so one plan does not oversubscribe a peer.
    free = {pid: peers[pid].disk_free for pid in peers}
    slots = {pid: peers[pid].replica_slots - store.replica_count(pid) for pid in peers}

    plan = PlacementPlan(assignments={}, class_map=dict(class_map))
    for cid in sorted(class_map):
        label = class_map[cid]
        pool = strong if label == CLASS1 else weak
        copies = cfg.copies_class1 if label == CLASS1 else cfg.copies_class2
        item = store._catalog[cid]
        targets: list[int] = []
        for pid in pool:
            if len(targets) == copies:
                break
            if pid == item.origin_peer or store.has(pid, cid):
                continue
            if free[pid] < item.size or slots[pid] < 1:
                continue
            targets.append(pid)
            free[pid] -= item.size
            slots[pid] -= 1
        plan.assignments[cid] = targets
        if len(targets) < copies:
            plan.shortfalls[cid] = copies - len(targets)
    return plan


def execute_placement(plan: PlacementPlan, store: ReplicaStore, t: Topology,
                      weights: Mapping[int, float],
                      cluster_labels: Mapping[int, str],
                      ) -> tuple[list[ReplicationAnnouncement], list[PlacementTransfer]]:
    """Materialize a plan: copy items to their targets and announce.

    Each stored replica records its hosting node's weight.  A target whose
    disk state changed since planning is skipped.  One announcement per
    affected peer lists everything that peer now hosts.
    """
    transfers: list[PlacementTransfer] = []
    affected: set[int] = set()
    for cid in sorted(plan.assignments):
        item = store._catalog[cid]
        for target in plan.assignments[cid]:
            if not store.can_accept(target, cid):
                plan.shortfalls[cid] = plan.shortfalls.get(cid, 0) + 1
                continue
            store.place(target, cid, node_weight=weights[target])
            transfers.append(PlacementTransfer(
                content_id=cid, source=item.origin_peer, target=target,
                nbytes=item.size,
                duration_ms=transfer_time(t, item.origin_peer, target, item.size)))
            affected.add(target)
    announcements = [
        ReplicationAnnouncement(
            nid=pid, clid=cluster_labels[pid],
            contents=tuple(store.items_at(pid)))
        for pid in sorted(affected)
    ]
    return announcements, transfers


def route_query(q: QueryRecord, cluster_labels: Mapping[int, str],
                store: ReplicaStore, t: Topology,
                alive: set[int] | None = None) -> int:
    """Pick the responding peer for a registered query.

    Strong-cluster copies are preferred; among candidates the one with the
    lowest e2e delay from the requester wins (peer id breaks ties).  Falls
    through to weak-cluster copies, then the origin peer.
    """
    item = store._catalog.get(q.ckwd)
    if item is None:
        raise UnknownContentError(q.ckwd)
    hosts = store.hosts(q.ckwd)
    if alive is not None:
        hosts = [h for h in hosts if h in alive]
    for label in ("S", "W"):
        candidates = [h for h in hosts if cluster_labels[h] == label]
        if candidates:
            return min(candidates, key=lambda h: (e2e_delay(t, q.nid, h), h))
    origin = item.origin_peer
    if (alive is None or origin in alive) and store.has(origin, q.ckwd, include_pending=False):
        return origin
    raise RoutingError(f"no live host for {q.ckwd}")
