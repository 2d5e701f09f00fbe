"""Shared helpers for building small hand-pinned fixtures."""

from __future__ import annotations

import pytest

from p2plb import ContentItem, PeerNode, ReplicaStore, Topology


def make_peer(pid: int, *, up_bw=1.0, cpu=1.0, mem=1.0, al=1.0,
              raw_up=1_000_000.0, raw_down=4_000_000.0,
              disk=100_000, slots=8, dep=0.0, cap=16) -> PeerNode:
    return PeerNode(id=pid, up_bw=up_bw, cpu=cpu, mem=mem, access_latency=al,
                    raw_up_bps=raw_up, raw_down_bps=raw_down,
                    disk_capacity=disk, disk_free=disk, replica_slots=slots,
                    departure_prob=dep, service_queue_cap=cap)


def make_topology(peers: dict[int, PeerNode], up: dict[int, float] | None = None,
                  down: dict[int, float] | None = None,
                  overlay_default: float = 10.0) -> Topology:
    """Full-mesh topology with uniform overlay delay unless overridden."""
    ids = sorted(peers)
    n = max(ids) + 1
    overlay = [[0.0 if i == j else overlay_default for j in range(n)] for i in range(n)]
    return Topology(
        peers=peers,
        access_up_ms={pid: (up or {}).get(pid, 5.0) for pid in ids},
        access_down_ms={pid: (down or {}).get(pid, 5.0) for pid in ids},
        overlay_ms=overlay,
    )


@pytest.fixture
def small_store():
    """Three peers, two items: x0 originates at peer 0, x1 at peer 1."""
    peers = {i: make_peer(i) for i in range(3)}
    catalog = {
        "x0": ContentItem(content_id="x0", origin_peer=0, size=1_000),
        "x1": ContentItem(content_id="x1", origin_peer=1, size=2_000),
    }
    store = ReplicaStore(peers, catalog)
    store.place(0, "x0", origin=True, node_weight=3.0)
    store.place(1, "x1", origin=True, node_weight=2.0)
    return peers, catalog, store
