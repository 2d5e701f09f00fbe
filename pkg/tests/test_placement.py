import pytest

from p2plb import (CLASS1, CLASS2, Cluster, ContentItem, PlacementConfig,
                   QueryRecord, QueryServer, ReplicaStore, RoutingError,
                   UnknownContentError, classify_content, execute_placement,
                   plan_placement, register_query, route_query)

from conftest import make_peer, make_topology


def make_qs(catalog, labels=None):
    labels = labels or {}
    table = {pid: (lab, f"{lab}0") for pid, lab in labels.items()}
    return QueryServer(catalog, table)


def catalog_of(*specs):
    return {cid: ContentItem(content_id=cid, origin_peer=origin, size=size)
            for cid, origin, size in specs}


class TestQueryServer:
    def test_single_query_logged_and_counted(self):
        qs = make_qs(catalog_of(("x", 0, 100)))
        register_query(qs, QueryRecord(nid=1, ckwd="x", time=0.0))
        assert len(qs.log) == 1
        assert qs.catalog["x"].access_count_window == 1

    def test_counts_accumulate_per_content(self):
        qs = make_qs(catalog_of(("x", 0, 100), ("y", 1, 100)))
        for i in range(5):
            register_query(qs, QueryRecord(nid=1, ckwd="x", time=float(i)))
        register_query(qs, QueryRecord(nid=2, ckwd="y", time=9.0))
        assert qs.catalog["x"].access_count_window == 5
        assert qs.catalog["y"].access_count_window == 1

    def test_unknown_keyword_rejected_log_unchanged(self):
        qs = make_qs(catalog_of(("x", 0, 100)))
        with pytest.raises(UnknownContentError):
            register_query(qs, QueryRecord(nid=1, ckwd="nope", time=0.0))
        assert qs.log == []


class TestClassify:
    def test_boundary_count_is_class1(self):
        qs = make_qs(catalog_of(("x", 0, 100)))
        qs.catalog["x"].access_count_window = 3
        assert classify_content(qs, a_min=3)["x"] == CLASS1

    def test_unaccessed_content_is_class2(self):
        qs = make_qs(catalog_of(("x", 0, 100)))
        assert classify_content(qs, a_min=1)["x"] == CLASS2

    def test_threshold_application(self):
        qs = make_qs(catalog_of(("x", 0, 100), ("y", 1, 100), ("z", 2, 100)))
        qs.catalog["x"].access_count_window = 5
        qs.catalog["y"].access_count_window = 2
        qs.catalog["z"].access_count_window = 9
        assert classify_content(qs, a_min=4) == {"x": CLASS1, "y": CLASS2, "z": CLASS1}


def placement_fixture():
    """Four strong peers (weights 4>3>2>1), two weak, item i0 from peer 0."""
    peers = {i: make_peer(i) for i in range(6)}
    weights = {0: 4.0, 1: 3.0, 2: 2.0, 3: 1.0, 4: 0.5, 5: 0.4}
    clusters = [
        Cluster(cluster_id="S0", label="S", members=[0, 1, 2, 3], leader=0),
        Cluster(cluster_id="W0", label="W", members=[4, 5], leader=4),
    ]
    catalog = catalog_of(("i0", 0, 1_000))
    store = ReplicaStore(peers, catalog)
    store.place(0, "i0", origin=True, node_weight=weights[0])
    return peers, weights, clusters, catalog, store


class TestPlan:
    def test_zero_copies_is_origin_only(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=0, copies_class2=0))
        assert plan.assignments == {"i0": []}
        assert plan.shortfalls == {}

    def test_descending_weight_selection_excluding_origin(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=2, copies_class2=1))
        assert plan.assignments["i0"] == [1, 2]

    def test_insufficient_disk_skipped(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        peers[1].disk_free = 999  # item is 1000 bytes
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=2, copies_class2=1))
        assert plan.assignments["i0"] == [2, 3]

    def test_class2_targets_weak_peers(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        plan = plan_placement({"i0": CLASS2}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=2, copies_class2=1))
        assert plan.assignments["i0"] == [4]

    def test_shortfall_recorded_when_targets_run_out(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        for pid in (1, 2, 3):
            peers[pid].disk_free = 0
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=2, copies_class2=1))
        assert plan.assignments["i0"] == []
        assert plan.shortfalls["i0"] == 2

    def test_replica_slots_respected(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        peers[1].replica_slots = 0
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=2, copies_class2=1))
        assert plan.assignments["i0"] == [2, 3]


class TestExecute:
    def test_empty_plan_no_changes(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        from p2plb import PlacementPlan
        before = {pid: peers[pid].disk_free for pid in peers}
        ann, transfers = execute_placement(
            PlacementPlan(assignments={}, class_map={}), store,
            make_topology(peers), weights, {pid: ("S" if pid < 4 else "W") for pid in peers})
        assert ann == [] and transfers == []
        assert {pid: peers[pid].disk_free for pid in peers} == before

    def test_disk_decrement_and_announcement(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        peers[1].disk_free = 5_000
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=1, copies_class2=1))
        labels = {pid: ("S" if pid < 4 else "W") for pid in peers}
        ann, transfers = execute_placement(plan, store, make_topology(peers), weights, labels)
        assert peers[1].disk_free == 4_000
        assert len(ann) == 1 and ann[0].nid == 1 and ann[0].clid == "S"
        assert ann[0].contents == ("i0",)
        assert len(transfers) == 1 and transfers[0].nbytes == 1_000

    def test_one_announcement_per_peer_lists_all_items(self):
        peers = {i: make_peer(i) for i in range(3)}
        weights = {0: 3.0, 1: 2.0, 2: 1.0}
        clusters = [Cluster(cluster_id="S0", label="S", members=[0, 1, 2], leader=0)]
        catalog = catalog_of(("a", 0, 100), ("b", 1, 100))
        store = ReplicaStore(peers, catalog)
        store.place(0, "a", origin=True, node_weight=3.0)
        store.place(1, "b", origin=True, node_weight=2.0)
        plan = plan_placement({"a": CLASS1, "b": CLASS1}, clusters, peers, weights,
                              store, PlacementConfig(copies_class1=1, copies_class2=0))
        # Both items pick the highest-weight non-origin peer with room.
        labels = {0: "S", 1: "S", 2: "S"}
        ann, _ = execute_placement(plan, store, make_topology(peers), weights, labels)
        by_nid = {a.nid: a for a in ann}
        assert by_nid[1].contents == ("a", "b")

    def test_stale_plan_target_skipped(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=1, copies_class2=1))
        peers[plan.assignments["i0"][0]].disk_free = 0  # changed after planning
        ann, transfers = execute_placement(
            plan, store, make_topology(peers), weights,
            {pid: ("S" if pid < 4 else "W") for pid in peers})
        assert transfers == [] and ann == []
        assert plan.shortfalls["i0"] == 1

    def test_stored_replica_records_host_weight(self):
        peers, weights, clusters, catalog, store = placement_fixture()
        plan = plan_placement({"i0": CLASS1}, clusters, peers, weights, store,
                              PlacementConfig(copies_class1=1, copies_class2=1))
        execute_placement(plan, store, make_topology(peers), weights,
                          {pid: ("S" if pid < 4 else "W") for pid in peers})
        assert store.copies_at(1)["i0"].node_weight == weights[1]


class TestRoute:
    def route_fixture(self):
        peers = {i: make_peer(i) for i in range(4)}
        labels = {0: "W", 1: "S", 2: "S", 3: "W"}
        catalog = catalog_of(("i0", 0, 500))
        store = ReplicaStore(peers, catalog)
        store.place(0, "i0", origin=True, node_weight=1.0)
        up = {0: 5.0, 1: 5.0, 2: 5.0, 3: 5.0}
        t = make_topology(peers, up=up, down={0: 5.0, 1: 2.0, 2: 20.0, 3: 1.0},
                          overlay_default=10.0)
        return peers, labels, catalog, store, t

    def test_unique_strong_candidate_wins(self):
        peers, labels, catalog, store, t = self.route_fixture()
        store.place(2, "i0", node_weight=1.0)
        q = QueryRecord(nid=3, ckwd="i0", time=0.0)
        assert route_query(q, labels, store, t) == 2

    def test_min_delay_among_strong(self):
        peers, labels, catalog, store, t = self.route_fixture()
        store.place(1, "i0", node_weight=1.0)  # down 2ms -> e2e 17
        store.place(2, "i0", node_weight=1.0)  # down 20ms -> e2e 35
        q = QueryRecord(nid=3, ckwd="i0", time=0.0)
        assert route_query(q, labels, store, t) == 1

    def test_class2_falls_back_to_weak_then_origin(self):
        peers, labels, catalog, store, t = self.route_fixture()
        q = QueryRecord(nid=1, ckwd="i0", time=0.0)
        assert route_query(q, labels, store, t) == 0  # weak origin
        store.place(3, "i0", node_weight=1.0)
        assert route_query(q, labels, store, t) == 3  # nearer weak replica

    def test_pending_copies_invisible(self):
        peers, labels, catalog, store, t = self.route_fixture()
        store.place(1, "i0", node_weight=1.0, complete=False)
        q = QueryRecord(nid=3, ckwd="i0", time=0.0)
        assert route_query(q, labels, store, t) == 0

    def test_dead_hosts_skipped_and_error_when_none(self):
        peers, labels, catalog, store, t = self.route_fixture()
        store.place(1, "i0", node_weight=1.0)
        q = QueryRecord(nid=3, ckwd="i0", time=0.0)
        assert route_query(q, labels, store, t, alive={0, 2, 3}) == 0
        with pytest.raises(RoutingError):
            route_query(q, labels, store, t, alive={2, 3})

    def test_responder_actually_hosts_item(self):
        peers, labels, catalog, store, t = self.route_fixture()
        store.place(1, "i0", node_weight=1.0)
        q = QueryRecord(nid=2, ckwd="i0", time=0.0)
        responder = route_query(q, labels, store, t)
        assert responder in store.hosts("i0")


class TestStoreAccounting:
    def test_disk_conservation(self, small_store):
        peers, catalog, store = small_store
        store.place(2, "x0", node_weight=1.0)
        store.place(2, "x1", node_weight=1.0)
        store.discard(2, "x0")
        total_used = sum(peers[p].disk_capacity - peers[p].disk_free for p in peers)
        hosted = sum(catalog[cid].size for p in peers for cid in store.items_at(p, include_pending=True))
        assert total_used == hosted

    def test_drop_replicas_keeps_origin(self, small_store):
        peers, catalog, store = small_store
        store.place(2, "x0", node_weight=1.0)
        store.place(2, "x1", node_weight=1.0)
        assert store.drop_replicas(2) == ["x0", "x1"]
        assert store.items_at(2) == []
        assert store.drop_replicas(0) == []
        assert store.items_at(0) == ["x0"]
        assert peers[2].disk_free == peers[2].disk_capacity

    def test_slot_limit_enforced(self, small_store):
        peers, catalog, store = small_store
        peers[2].replica_slots = 1
        store.place(2, "x0", node_weight=1.0)
        assert not store.can_accept(2, "x1")
