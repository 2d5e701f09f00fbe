import pytest

from p2plb import (BalancingConfig, Cluster, ClusterSnapshot, ContentItem,
                   HotItemList, LoadReport, MoveReason, ReplicaStore,
                   availability_replicate, cleanup_replicas,
                   compute_cluster_load, inter_cluster_balance,
                   intra_cluster_balance, plan_inter_moves)

from conftest import make_peer


def cfg(**kw):
    base = dict(s_th=50.0, load_diff_threshold=5.0, alpha_cleanup=2,
                report_period_ms=1000.0, departure_prob_threshold=0.5)
    base.update(kw)
    return BalancingConfig(**base)


def store_with_own_items(n, size=1, disk=10_000, slots=10):
    """Each peer i originates item f'h{i}'; returns (peers, sizes, store)."""
    peers = {i: make_peer(i, disk=disk, slots=slots) for i in range(n)}
    catalog = {f"h{i}": ContentItem(content_id=f"h{i}", origin_peer=i, size=size)
               for i in range(n)}
    store = ReplicaStore(peers, catalog)
    for i in range(n):
        store.place(i, f"h{i}", origin=True, node_weight=1.0)
    return peers, {c: size for c in catalog}, store


class TestHotItemList:
    def test_orders_by_count_then_id(self):
        hot = HotItemList.from_counts({"b": 5, "a": 5, "c": 9, "z": 0})
        assert hot.items == ("c", "a", "b")

    def test_limit(self):
        hot = HotItemList.from_counts({"a": 3, "b": 2, "c": 1}, limit=2)
        assert hot.items == ("a", "b")


class TestCleanup:
    def seasoned_store(self):
        peers, sizes, store = store_with_own_items(3, size=100)
        store.place(0, "h1", node_weight=1.0)
        store.place(0, "h2", node_weight=1.0)
        # Age the copies past their first window.
        for copy in store.copies_at(0).values():
            copy.fresh = False
        return peers, store

    def test_strict_threshold_boundary(self):
        peers, store = self.seasoned_store()
        for _ in range(1):
            store.record_access(0, "h1")  # alpha - 1 hits
        for _ in range(2):
            store.record_access(0, "h2")  # exactly alpha hits
        deleted = cleanup_replicas(store, 0, alpha_cleanup=2)
        assert deleted == ["h1"]
        assert store.has(0, "h2")

    def test_origin_never_deleted(self):
        peers, store = self.seasoned_store()
        deleted = cleanup_replicas(store, 0, alpha_cleanup=5)
        assert "h0" not in deleted
        assert store.has(0, "h0")

    def test_no_replicas_no_change(self):
        peers, sizes, store = store_with_own_items(2)
        assert cleanup_replicas(store, 1, alpha_cleanup=3) == []
        assert store.items_at(1) == ["h1"]

    def test_disk_restored_exactly(self):
        peers, store = self.seasoned_store()
        before = peers[0].disk_free
        deleted = cleanup_replicas(store, 0, alpha_cleanup=2)
        assert deleted == ["h1", "h2"]
        assert peers[0].disk_free == before + 200

    def test_window_counters_reset(self):
        peers, store = self.seasoned_store()
        store.record_access(0, "h1")
        store.record_access(0, "h1")
        cleanup_replicas(store, 0, alpha_cleanup=1)
        assert all(v == 0 for v in store.window_counts(0).values())

    def test_fresh_copy_survives_first_pass_only(self):
        peers, sizes, store = store_with_own_items(2, size=100)
        store.place(0, "h1", node_weight=1.0)
        assert cleanup_replicas(store, 0, alpha_cleanup=1) == []
        assert cleanup_replicas(store, 0, alpha_cleanup=1) == ["h1"]


class TestIntra:
    def run(self, loads, disk, threshold=5.0, s_th=50.0, hot=None):
        n = len(loads)
        peers, sizes, store = store_with_own_items(n)
        reports = [LoadReport(peer=i, load=loads[i], disk_free=disk[i])
                   for i in range(n)]
        hot = hot or {i: HotItemList(items=(f"h{i}",)) for i in range(n)}
        moves = intra_cluster_balance(reports, hot, cfg(load_diff_threshold=threshold, s_th=s_th),
                                      store, peers, sizes)
        return moves

    def test_equal_loads_no_moves(self):
        assert self.run([7, 7, 7, 7], [999] * 4) == []

    def test_four_peer_hand_trace(self):
        # loads [10,8,3,1]: pair (p0,p3) diff 9 > 5 moves, (p1,p2) diff 5 does not.
        moves = self.run([10, 8, 3, 1], [999] * 4)
        assert [(m.source, m.target, m.item) for m in moves] == [(0, 3, "h0")]
        assert moves[0].reason is MoveReason.INTRA

    def test_strict_inequality_on_gap(self):
        assert self.run([10, 5], [999] * 2) == []
        moves = self.run([10.1, 5], [999] * 2)
        assert [(m.source, m.target) for m in moves] == [(0, 1)]

    def test_light_half_pruned_by_disk_floor(self):
        assert self.run([10, 2], [999, 10]) == []

    def test_heavy_half_not_pruned(self):
        # Heavy peer with low disk stays; it is a source, not a target.
        moves = self.run([10, 2], [10, 999])
        assert [(m.source, m.target) for m in moves] == [(0, 1)]

    def test_fewer_than_two_survivors(self):
        assert self.run([10], [999]) == []

    def test_source_without_hot_item_skipped(self):
        moves = self.run([10, 1], [999, 999], hot={0: HotItemList(items=()),
                                                   1: HotItemList(items=())})
        assert moves == []

    def test_move_legality(self):
        moves = self.run([20, 9, 4, 0], [999] * 4, threshold=3.0)
        for m in moves:
            assert m.source != m.target
            assert m.source_load - m.target_load > 3.0


class TestAvailability:
    def fixture(self, probs, hosts_extra=()):
        peers, sizes, store = store_with_own_items(3, size=100)
        for pid, cid in hosts_extra:
            store.place(pid, cid, node_weight=1.0)
        cluster = Cluster(cluster_id="S0", label="S", members=[0, 1, 2], leader=0)
        loads = {0: 50.0, 1: 10.0, 2: 30.0}
        disk = {i: float(peers[i].disk_free) for i in range(3)}
        hot = HotItemList(items=("h0", "h1", "h2"))
        return availability_replicate(cluster, probs, hot, loads, disk, store,
                                      peers, sizes, cfg())

    def test_zero_probs_no_moves(self):
        assert self.fixture({0: 0.0, 1: 0.0, 2: 0.0}) == []

    def test_risky_peer_hot_item_replicated_to_lightest(self):
        moves = self.fixture({0: 0.9, 1: 0.0, 2: 0.0})
        assert [(m.item, m.source, m.target) for m in moves] == [("h0", 0, 1)]
        assert moves[0].reason is MoveReason.AVAILABILITY

    def test_already_replicated_in_cluster_skipped(self):
        moves = self.fixture({0: 0.9, 1: 0.0, 2: 0.0}, hosts_extra=[(2, "h0")])
        assert moves == []

    def test_threshold_boundary_inclusive(self):
        assert self.fixture({0: 0.5, 1: 0.0, 2: 0.0}) != []
        assert self.fixture({0: 0.49, 1: 0.0, 2: 0.0}) == []


def snap(cid, loads, disk):
    return ClusterSnapshot(cluster_id=cid, members=tuple(sorted(loads)),
                           loads=loads, disk_free=disk)


class TestInter:
    def test_not_triggered_at_equality(self):
        s = snap("S0", {0: 100.0}, {0: 999.0})
        n = snap("S1", {1: 100.0}, {1: 999.0})
        hot = HotItemList(items=("h0",))
        assert inter_cluster_balance(s, [n], hot, {"h0": 10}, cfg()) == []

    def test_trigger_strictly_above_ten_percent(self):
        n = snap("S1", {1: 100.0}, {1: 999.0})
        hot = HotItemList(items=("h0",))
        at = inter_cluster_balance(snap("S0", {0: 110.0}, {0: 9.0}), [n], hot,
                                   {"h0": 10}, cfg())
        above = inter_cluster_balance(snap("S0", {0: 111.0}, {0: 9.0}), [n], hot,
                                      {"h0": 10}, cfg())
        assert at == []
        assert above == [("h0", "S1")]

    def test_round_robin_when_fewer_leaders_than_items(self):
        s = snap("S0", {0: 500.0}, {0: 9.0})
        n1 = snap("S1", {1: 9.0}, {1: 999.0})
        n2 = snap("S2", {2: 5.0}, {2: 999.0})
        hot = HotItemList(items=("h0", "h1", "h2"))
        sizes = {"h0": 10, "h1": 10, "h2": 10}
        # Willing leaders sorted ascending by load: S2 (5) then S1 (9).
        assignment = inter_cluster_balance(s, [n1, n2], hot, sizes, cfg())
        assert assignment == [("h0", "S2"), ("h1", "S1"), ("h2", "S2")]

    def test_first_m_leaders_when_enough(self):
        s = snap("S0", {0: 500.0}, {0: 9.0})
        neighbors = [snap(f"S{i}", {10 + i: float(i)}, {10 + i: 999.0})
                     for i in (1, 2, 3)]
        hot = HotItemList(items=("h0",))
        assignment = inter_cluster_balance(s, neighbors, hot, {"h0": 10}, cfg())
        assert assignment == [("h0", "S1")]

    def test_willingness_is_strict_disk_inequality(self):
        s = snap("S0", {0: 500.0}, {0: 9.0})
        exactly = snap("S1", {1: 1.0}, {1: 10.0})   # == min item size: unwilling
        above = snap("S2", {2: 9.0}, {2: 11.0})
        hot = HotItemList(items=("h0",))
        assignment = inter_cluster_balance(s, [exactly, above], hot, {"h0": 10}, cfg())
        assert assignment == [("h0", "S2")]

    def test_no_willing_leaders_empty(self):
        s = snap("S0", {0: 500.0}, {0: 9.0})
        n = snap("S1", {1: 1.0}, {1: 5.0})
        hot = HotItemList(items=("h0",))
        assert inter_cluster_balance(s, [n], hot, {"h0": 10}, cfg()) == []


class TestPlanInterMoves:
    def test_lightest_member_first_with_spreading(self):
        peers, sizes, store = store_with_own_items(6, size=100)
        self_snap = snap("S0", {0: 900.0, 1: 100.0}, {0: 999.0, 1: 999.0})
        target = ClusterSnapshot(cluster_id="S1", members=(2, 3),
                                 loads={2: 10.0, 3: 5.0},
                                 disk_free={2: 9_999.0, 3: 9_999.0})
        store.place(0, "h1", node_weight=1.0)  # heavy member hosts both items
        for copy in store.copies_at(0).values():
            copy.fresh = False
        assignment = [("h0", "S1"), ("h1", "S1")]
        moves = plan_inter_moves(assignment, self_snap, {"S1": target}, store,
                                 peers, sizes)
        # First item lands on the lightest member (3); its tentative load
        # then exceeds member 2, so the second item goes to 2.
        assert [(m.item, m.source, m.target) for m in moves] == [
            ("h0", 0, 3), ("h1", 0, 2)]
        for m in moves:
            assert m.reason is MoveReason.INTER

    def test_source_is_most_loaded_host(self):
        peers, sizes, store = store_with_own_items(4, size=100)
        store.place(1, "h0", node_weight=1.0)
        self_snap = snap("S0", {0: 10.0, 1: 90.0}, {0: 999.0, 1: 999.0})
        target = snap("S1", {2: 0.0, 3: 0.0}, {2: 9_999.0, 3: 9_999.0})
        moves = plan_inter_moves([("h0", "S1")], self_snap, {"S1": target},
                                 store, peers, sizes)
        assert moves[0].source == 1


def test_compute_cluster_load():
    assert compute_cluster_load([LoadReport(0, 7.0, 1.0)]) == 7.0
    assert compute_cluster_load([LoadReport(0, 3.0, 1.0),
                                 LoadReport(1, 4.0, 1.0),
                                 LoadReport(2, 5.0, 1.0)]) == 12.0
    assert compute_cluster_load([]) == 0.0
