"""Warm-up state snapshots and their offline consistency checker.

The dump captures topology, cluster assignment, content classes, the
replica map, and the placement announcements in one JSON document so the
placement invariants can be re-validated without the simulator.
"""

from __future__ import annotations

import json
from typing import Any

from .engine import Simulation


def dump_state(sim: Simulation) -> dict[str, Any]:
    """Snapshot a simulation that has completed classification/placement."""
    replica_map = {}
    for pid in sorted(sim.topology.peers):
        copies = sim.store.copies_at(pid)
        replica_map[str(pid)] = [
            {
                "content": cid,
                "origin": copies[cid].is_origin,
                "node_weight": copies[cid].node_weight,
            }
            for cid in sorted(copies) if copies[cid].complete
        ]
    return {
        "topology": sim.topology.to_dict(),
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "label": c.label,
                "members": list(c.members),
                "leader": c.leader,
                "neighbors": list(c.neighbors),
            }
            for c in sim.clusters
        ],
        "class_map": dict(sorted(sim.class_map.items())),
        "catalog": [
            {
                "content": cid,
                "origin_peer": sim.catalog[cid].origin_peer,
                "size": sim.catalog[cid].size,
                "class": sim.catalog[cid].class_label,
            }
            for cid in sorted(sim.catalog)
        ],
        "replica_map": replica_map,
        "announcements": [
            {"nid": a.nid, "clid": a.clid, "contents": list(a.contents)}
            for a in sim.announcements
        ],
    }


def dump_json(sim: Simulation) -> str:
    return json.dumps(dump_state(sim), sort_keys=True)


def verify_dump(dump: dict[str, Any]) -> list[str]:
    """Re-check placement invariants on a state dump.

    Returns a list of human-readable violations; an empty list means the
    dump is consistent.  Checks: every peer sits in exactly one cluster and
    leaders are members; class-1 replicas live on strong peers and class-2
    replicas on weak peers (origins excepted); every announcement matches
    the replica map entry of its peer.
    """
    problems: list[str] = []
    peer_ids = {str(p["id"]) for p in dump["topology"]["peers"]}

    seen: dict[str, str] = {}
    label_of: dict[str, str] = {}
    for cluster in dump["clusters"]:
        if cluster["leader"] not in cluster["members"]:
            problems.append(f"cluster {cluster['cluster_id']}: leader not a member")
        for m in cluster["members"]:
            key = str(m)
            if key in seen:
                problems.append(f"peer {m} appears in clusters {seen[key]} "
                                f"and {cluster['cluster_id']}")
            seen[key] = cluster["cluster_id"]
            label_of[key] = cluster["label"]
    missing = peer_ids - set(seen)
    if missing:
        problems.append(f"peers missing from clusters: {sorted(missing)}")

    class_map = dump["class_map"]
    want_label = {"class1": "S", "class2": "W"}
    for pid, copies in dump["replica_map"].items():
        for copy in copies:
            if copy["origin"]:
                continue
            cls = class_map.get(copy["content"], "unclassified")
            expect = want_label.get(cls)
            if expect and label_of.get(pid) != expect:
                problems.append(
                    f"{cls} replica of {copy['content']} on {label_of.get(pid)}"
                    f"-cluster peer {pid}")

    for ann in dump["announcements"]:
        pid = str(ann["nid"])
        hosted = sorted(c["content"] for c in dump["replica_map"].get(pid, []))
        if sorted(ann["contents"]) != hosted:
            problems.append(f"announcement for peer {pid} does not match its "
                            f"hosted set")
        if label_of.get(pid) != ann["clid"]:
            problems.append(f"announcement for peer {pid} carries label "
                            f"{ann['clid']}, cluster says {label_of.get(pid)}")
    return problems
