"""Deterministic discrete-event kernel driving workload, routing, transfers,
periodic balancing, churn, and metrics collection.

Events dispatch in (time, sequence) order off a single heap; all mutable
state lives on the Simulation instance, so a run is a pure function of
(configuration, seed).  With load balancing disabled the periodic ticks
still fire but their handlers do nothing: the baseline arm is
placement-only.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .balancing import (BalancingConfig, ClusterSnapshot, HotItemList,
                        LoadReport, ReplicationMove, availability_replicate,
                        cleanup_replicas, inter_cluster_balance,
                        intra_cluster_balance, plan_inter_moves)
from .clustering import Cluster, node_weights
from .errors import ConfigurationError, RoutingError, UnknownContentError
from .placement import (ContentItem, PlacementConfig, QueryRecord, QueryServer,
                        ReplicaStore, classify_content, execute_placement,
                        plan_placement, register_query, route_query)
from .topology import Topology, e2e_delay, transfer_time
from .workload import WorkloadConfig, generate_queries


class EventKind(enum.Enum):
    QUERY_ARRIVAL = "QueryArrival"
    TRANSFER_COMPLETE = "TransferComplete"
    REPORT_TICK = "ReportTick"
    BALANCE_TICK = "BalanceTick"
    CLEANUP_TICK = "CleanupTick"
    PEER_LEAVE = "PeerLeave"
    PEER_JOIN = "PeerJoin"
    CLASSIFY_PLACE = "ClassifyPlace"
    SCENARIO_END = "ScenarioEnd"


@dataclass
class MetricsReport:
    """Per-scenario results over the post-warmup window."""

    mean_delay_ms: float
    aggregate_throughput_bps: float
    packets_lost: int
    requests_total: int
    requests_completed: int
    replication_bytes_moved: int
    per_peer_load: dict[str, int]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _derive_rng(seed: int | str, stream: str) -> random.Random:
    # String seeding hashes via sha512, stable across processes and runs.
    return random.Random(f"{seed}/{stream}")


_EWMA_GAIN = 0.3  # weight of the newest offline observation per period


class Simulation:
    """One scenario: owns the event heap and every piece of mutable state."""

    def __init__(self, topology: Topology, clusters: Sequence[Cluster],
                 workload: WorkloadConfig,
                 placement_cfg: PlacementConfig | None = None,
                 balancing_cfg: BalancingConfig | None = None, *,
                 lb_enabled: bool = True, seed: int = 0, audit_level: int = 0,
                 churn_origin_exempt: bool = True,
                 arrivals: Iterable[QueryRecord] | None = None,
                 track_tick_loads: bool = False):
        workload.validate()
        self.placement_cfg = placement_cfg or PlacementConfig()
        self.balancing_cfg = balancing_cfg or BalancingConfig()
        self.placement_cfg.validate()
        self.balancing_cfg.validate()

        self.topology = topology
        self.clusters = list(clusters)
        self.workload = workload
        self.lb_enabled = lb_enabled
        self.seed = seed
        self.audit_level = audit_level
        self.churn_origin_exempt = churn_origin_exempt
        self.track_tick_loads = track_tick_loads

        peers = topology.peers
        if workload.catalog_size > len(peers):
            raise ConfigurationError(
                f"workload.catalog_size {workload.catalog_size} exceeds "
                f"n_peers {len(peers)}: each item needs its own origin peer")

        covered = [m for c in self.clusters for m in c.members]
        if sorted(covered) != sorted(peers):
            raise ConfigurationError("clusters must cover every peer exactly once")

        self.weights = {w.peer: w.value for w in node_weights(topology)}
        self.labels = {m: c.label for c in self.clusters for m in c.members}
        cluster_table = {m: (c.label, c.cluster_id)
                         for c in self.clusters for m in c.members}

        origin_ids = sorted(peers)[:workload.catalog_size]
        self.catalog: dict[str, ContentItem] = {
            f"c{i:03d}": ContentItem(content_id=f"c{i:03d}", origin_peer=pid,
                                     size=workload.payload_bytes)
            for i, pid in enumerate(origin_ids)
        }
        self.item_sizes = {cid: item.size for cid, item in self.catalog.items()}
        self.qs = QueryServer(self.catalog, cluster_table)
        self.store = ReplicaStore(peers, self.catalog)
        for cid in sorted(self.catalog):
            item = self.catalog[cid]
            if peers[item.origin_peer].disk_free < item.size:
                raise ConfigurationError(
                    f"peer {item.origin_peer} cannot hold its own origin item")
            self.store.place(item.origin_peer, cid, origin=True,
                             node_weight=self.weights[item.origin_peer])
        self.origin_peers = frozenset(item.origin_peer for item in self.catalog.values())

        self.now = 0.0
        self.end_ms = workload.duration_s * 1000.0
        self.warmup_ms = workload.warmup_s * 1000.0
        self._heap: list[tuple[float, int, EventKind, object]] = []
        self._seq = itertools.count()

        self.live: set[int] = set(peers)
        self.incarnation: dict[int, int] = {pid: 0 for pid in peers}
        self.pending: dict[int, int] = {pid: 0 for pid in peers}
        self.busy_until: dict[int, float] = {pid: 0.0 for pid in peers}
        self.period_load: dict[int, float] = {pid: 0.0 for pid in peers}
        self.depart_est: dict[int, float] = {pid: peers[pid].departure_prob for pid in peers}
        self._left_this_period: set[int] = set()
        self._snapshots: dict[str, tuple] | None = None
        self._tick_index = 0

        self.requests_total = 0
        self.packets_lost = 0
        self.requests_completed = 0
        self._delay_sum = 0.0
        self._bytes_measured = 0
        self.replication_bytes_moved = 0
        self.served_bytes: dict[int, int] = {pid: 0 for pid in peers}
        self.audit_entries: list[dict] = []
        self.tick_loads: list[tuple[float, int, float]] = []
        self.announcements = []
        self.class_map: dict[str, str] = {}
        self._placement_done = False

        if arrivals is not None:
            self._arrivals: Iterator[QueryRecord] = iter(arrivals)
        else:
            self._arrivals = generate_queries(
                workload, sorted(self.catalog), sorted(peers),
                f"{seed}/workload")
        self._rng_churn = _derive_rng(seed, "churn")

        self._schedule(self.warmup_ms, EventKind.CLASSIFY_PLACE, None)
        self._schedule(self.end_ms, EventKind.SCENARIO_END, None)
        # Periodic balancing starts one period after classification and
        # placement, so the warm-up dump reflects placement alone.
        first_tick = self.warmup_ms + self.balancing_cfg.report_period_ms
        if first_tick < self.end_ms:
            self._schedule_tick_trio(first_tick)
        self._schedule_next_arrival()
        if workload.churn_rate > 0:
            gap = self._rng_churn.expovariate(workload.churn_rate) * 1000.0
            self._schedule(gap, EventKind.PEER_LEAVE, None)

    # -- scheduling ---------------------------------------------------------

    def _schedule(self, time_ms: float, kind: EventKind, payload: object) -> None:
        heapq.heappush(self._heap, (time_ms, next(self._seq), kind, payload))

    def _schedule_tick_trio(self, time_ms: float) -> None:
        self._schedule(time_ms, EventKind.REPORT_TICK, None)
        self._schedule(time_ms, EventKind.BALANCE_TICK, None)
        self._schedule(time_ms, EventKind.CLEANUP_TICK, None)

    def _schedule_next_arrival(self) -> None:
        q = next(self._arrivals, None)
        if q is not None:
            self._schedule(q.time, EventKind.QUERY_ARRIVAL, q)

    def _audit(self, level: int, entry: dict) -> None:
        if self.audit_level >= level:
            self.audit_entries.append({"t": self.now, **entry})

    # -- main loop ----------------------------------------------------------

    def run(self, *, stop_after_placement: bool = False) -> MetricsReport:
        handlers = {
            EventKind.QUERY_ARRIVAL: self._handle_arrival,
            EventKind.TRANSFER_COMPLETE: self._handle_transfer_complete,
            EventKind.REPORT_TICK: self._handle_report,
            EventKind.BALANCE_TICK: self._handle_balance,
            EventKind.CLEANUP_TICK: self._handle_cleanup,
            EventKind.PEER_LEAVE: self._handle_leave,
            EventKind.PEER_JOIN: self._handle_join,
            EventKind.CLASSIFY_PLACE: self._handle_classify_place,
        }
        while self._heap:
            time_ms, _, kind, payload = heapq.heappop(self._heap)
            if time_ms < self.now:
                raise AssertionError("event scheduled in the past")
            self.now = time_ms
            if kind is EventKind.SCENARIO_END:
                break
            handlers[kind](payload)
            if stop_after_placement and self._placement_done:
                break
        return self._finalize()

    def _finalize(self) -> MetricsReport:
        window_s = self.workload.duration_s - self.workload.warmup_s
        throughput = (self._bytes_measured * 8.0 / window_s) if window_s > 0 else 0.0
        mean_delay = (self._delay_sum / self.requests_completed
                      if self.requests_completed else 0.0)
        return MetricsReport(
            mean_delay_ms=mean_delay,
            aggregate_throughput_bps=throughput,
            packets_lost=self.packets_lost,
            requests_total=self.requests_total,
            requests_completed=self.requests_completed,
            replication_bytes_moved=self.replication_bytes_moved,
            per_peer_load={str(pid): self.served_bytes[pid]
                           for pid in sorted(self.served_bytes)},
        )

    def audit_jsonl(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.audit_entries)

    # -- queries ------------------------------------------------------------

    def _handle_arrival(self, q: QueryRecord) -> None:
        self._schedule_next_arrival()
        measured = q.time >= self.warmup_ms
        if measured:
            self.requests_total += 1
        try:
            register_query(self.qs, q)
        except UnknownContentError:
            if measured:
                self.packets_lost += 1
            self._audit(1, {"event": "query_miss", "nid": q.nid, "ckwd": q.ckwd})
            return
        try:
            responder = route_query(q, self.labels, self.store, self.topology,
                                    alive=self.live)
        except RoutingError:
            if measured:
                self.packets_lost += 1
            self._audit(1, {"event": "query_unroutable", "nid": q.nid, "ckwd": q.ckwd})
            return
        if self.pending[responder] >= self.topology.peers[responder].service_queue_cap:
            if measured:
                self.packets_lost += 1
            self._audit(1, {"event": "query_drop", "nid": q.nid, "ckwd": q.ckwd,
                            "responder": responder})
            return
        self.pending[responder] += 1
        size = self.item_sizes[q.ckwd]
        bw = min(self.topology.peers[responder].raw_up_bps,
                 self.topology.peers[q.nid].raw_down_bps)
        serialization = size * 8.0 / bw * 1000.0
        start = max(self.now, self.busy_until[responder])
        self.busy_until[responder] = start + serialization
        done = self.busy_until[responder] + e2e_delay(self.topology, q.nid, responder)
        self._audit(1, {"event": "query_routed", "nid": q.nid, "ckwd": q.ckwd,
                        "responder": responder})
        self._schedule(done, EventKind.TRANSFER_COMPLETE,
                       ("query", responder, self.incarnation[responder], q, measured))

    def _complete_query(self, responder: int, inc0: int, q: QueryRecord,
                        measured: bool) -> None:
        if self.incarnation[responder] != inc0:
            if measured:
                self.packets_lost += 1
            self._audit(1, {"event": "query_aborted", "nid": q.nid,
                            "ckwd": q.ckwd, "responder": responder})
            return
        self.pending[responder] -= 1
        size = self.item_sizes[q.ckwd]
        self.period_load[responder] += size
        self.store.record_access(responder, q.ckwd)
        if measured:
            self.requests_completed += 1
            self._delay_sum += self.now - q.time
            self._bytes_measured += size
            self.served_bytes[responder] += size
        self._audit(1, {"event": "query_complete", "nid": q.nid, "ckwd": q.ckwd,
                        "responder": responder, "delay_ms": self.now - q.time})

    def _handle_transfer_complete(self, payload: tuple) -> None:
        if payload[0] == "query":
            self._complete_query(*payload[1:])
        else:
            self._complete_move(*payload[1:])

    # -- classification and placement ----------------------------------------

    def _handle_classify_place(self, _payload: object) -> None:
        self.class_map = classify_content(self.qs, self.placement_cfg.a_min)
        plan = plan_placement(self.class_map, self.clusters, self.topology.peers,
                              self.weights, self.store, self.placement_cfg)
        announcements, transfers = execute_placement(
            plan, self.store, self.topology, self.weights, self.labels)
        self.announcements = announcements
        for tr in transfers:
            self.replication_bytes_moved += tr.nbytes
        self._placement_done = True
        n_class1 = sum(1 for v in self.class_map.values() if v == "class1")
        self._audit(0, {"event": "placement", "class1": n_class1,
                        "copies": len(transfers),
                        "shortfalls": dict(sorted(plan.shortfalls.items()))})

    # -- periodic ticks -------------------------------------------------------

    def _handle_report(self, _payload: object) -> None:
        self._tick_index += 1
        next_t = self.now + self.balancing_cfg.report_period_ms
        if next_t < self.end_ms:
            self._schedule_tick_trio(next_t)
        if not self.lb_enabled:
            return
        snapshots: dict[str, tuple] = {}
        for cluster in self.clusters:
            members = tuple(m for m in cluster.members if m in self.live)
            reports = [LoadReport(m, self.period_load[m],
                                  float(self.topology.peers[m].disk_free))
                       for m in members]
            hot_per_peer = {m: HotItemList.from_counts(self.store.window_counts(m))
                            for m in members}
            totals: Counter[str] = Counter()
            for m in members:
                totals.update(self.store.window_counts(m))
            cluster_hot = HotItemList.from_counts(
                totals, limit=self.balancing_cfg.hot_list_size)
            snap = ClusterSnapshot(
                cluster_id=cluster.cluster_id, members=members,
                loads={r.peer: r.load for r in reports},
                disk_free={r.peer: r.disk_free for r in reports})
            snapshots[cluster.cluster_id] = (cluster, snap, reports,
                                             hot_per_peer, cluster_hot)
        if self.track_tick_loads:
            for pid in sorted(self.period_load):
                self.tick_loads.append((self.now, pid, self.period_load[pid]))
        for pid in self.depart_est:
            obs = 1.0 if pid in self._left_this_period else 0.0
            self.depart_est[pid] = ((1 - _EWMA_GAIN) * self.depart_est[pid]
                                    + _EWMA_GAIN * obs)
        self._left_this_period.clear()
        for pid in self.period_load:
            self.period_load[pid] = 0.0
        self._snapshots = snapshots

    def _handle_balance(self, _payload: object) -> None:
        if not self.lb_enabled or not self._snapshots:
            return
        moves: list[ReplicationMove] = []
        for cid in sorted(self._snapshots):
            cluster, snap, reports, hot_per_peer, cluster_hot = self._snapshots[cid]
            moves.extend(intra_cluster_balance(
                reports, hot_per_peer, self.balancing_cfg, self.store,
                self.topology.peers, self.item_sizes))
            moves.extend(availability_replicate(
                cluster, self.depart_est, cluster_hot, snap.loads,
                snap.disk_free, self.store, self.topology.peers,
                self.item_sizes, self.balancing_cfg))
        for cid in sorted(self._snapshots):
            cluster, snap, _, _, cluster_hot = self._snapshots[cid]
            neighbor_snaps = {
                n: self._snapshots[n][1]
                for n in sorted(cluster.neighbors) if n in self._snapshots
            }
            if not neighbor_snaps or not cluster_hot.items:
                continue
            assignment = inter_cluster_balance(
                snap, list(neighbor_snaps.values()), cluster_hot,
                self.item_sizes, self.balancing_cfg)
            if not assignment:
                continue
            self._audit(0, {"event": "inter_assignment", "cluster": cid,
                            "load": snap.total_load,
                            "assignment": [[i, c] for i, c in assignment]})
            moves.extend(plan_inter_moves(
                assignment, snap, neighbor_snaps, self.store,
                self.topology.peers, self.item_sizes))
        self.apply_moves(moves)

    def apply_moves(self, moves: Sequence[ReplicationMove]) -> None:
        """Start a background transfer per legal move; replicas become
        routable only when the transfer completes."""
        for mv in moves:
            if (mv.source not in self.live or mv.target not in self.live
                    or not self.store.can_accept(mv.target, mv.item)):
                self._audit(0, {"event": "move_skipped", "item": mv.item,
                                "source": mv.source, "target": mv.target,
                                "reason": mv.reason.value})
                continue
            self.store.place(mv.target, mv.item, complete=False,
                             node_weight=self.weights[mv.target])
            duration = transfer_time(self.topology, mv.source, mv.target,
                                     self.item_sizes[mv.item])
            self._audit(0, {"event": "move_started", "item": mv.item,
                            "source": mv.source, "target": mv.target,
                            "reason": mv.reason.value,
                            "source_load": mv.source_load,
                            "target_load": mv.target_load})
            self._schedule(self.now + duration, EventKind.TRANSFER_COMPLETE,
                           ("move", mv, self.incarnation[mv.source],
                            self.incarnation[mv.target]))

    def _complete_move(self, mv: ReplicationMove, inc_src: int, inc_tgt: int) -> None:
        if self.incarnation[mv.target] != inc_tgt:
            # Target departed mid-transfer; its pending copy went with it.
            self._audit(0, {"event": "move_aborted", "item": mv.item,
                            "source": mv.source, "target": mv.target})
            return
        if self.incarnation[mv.source] != inc_src:
            self.store.discard(mv.target, mv.item)
            self._audit(0, {"event": "move_aborted", "item": mv.item,
                            "source": mv.source, "target": mv.target})
            return
        self.store.finalize(mv.target, mv.item)
        self.replication_bytes_moved += self.item_sizes[mv.item]
        self._audit(0, {"event": "move_completed", "item": mv.item,
                        "source": mv.source, "target": mv.target,
                        "reason": mv.reason.value})

    def _handle_cleanup(self, _payload: object) -> None:
        # The access window spans cleanup_every report periods.
        if not self.lb_enabled or self._tick_index % self.balancing_cfg.cleanup_every:
            return
        for pid in sorted(self.live):
            deleted = cleanup_replicas(self.store, pid, self.balancing_cfg.alpha_cleanup)
            if deleted:
                self._audit(0, {"event": "cleanup", "peer": pid, "deleted": deleted})

    # -- churn ----------------------------------------------------------------

    def _handle_leave(self, _payload: object) -> None:
        gap = self._rng_churn.expovariate(self.workload.churn_rate) * 1000.0
        self._schedule(self.now + gap, EventKind.PEER_LEAVE, None)
        eligible = sorted(self.live - self.origin_peers
                          if self.churn_origin_exempt else self.live)
        if len(eligible) == 0 or len(self.live) <= 1:
            return
        victim = self._rng_churn.choice(eligible)
        self.live.discard(victim)
        self.incarnation[victim] += 1
        self.store.drop_replicas(victim)
        self.pending[victim] = 0
        self.busy_until[victim] = 0.0
        self._left_this_period.add(victim)
        self._audit(0, {"event": "peer_leave", "peer": victim})
        offline = self._rng_churn.expovariate(1.0 / self.workload.offline_mean_s) * 1000.0
        self._schedule(self.now + offline, EventKind.PEER_JOIN, victim)

    def _handle_join(self, victim: int) -> None:
        if victim in self.live:
            return
        self.live.add(victim)
        self._audit(0, {"event": "peer_join", "peer": victim})


def run_scenario(topology: Topology, clusters: Sequence[Cluster],
                 workload: WorkloadConfig,
                 placement_cfg: PlacementConfig | None = None,
                 balancing_cfg: BalancingConfig | None = None, *,
                 lb_enabled: bool = True, seed: int = 0,
                 audit_level: int = 0) -> MetricsReport:
    """Run one scenario end to end and return its metrics."""
    sim = Simulation(topology, clusters, workload, placement_cfg, balancing_cfg,
                     lb_enabled=lb_enabled, seed=seed, audit_level=audit_level)
    return sim.run()
