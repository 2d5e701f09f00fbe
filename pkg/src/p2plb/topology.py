"""Simulated peer network: asymmetric access links plus a full-mesh overlay.

Every peer attaches to exactly one access router; the routers connect
directly to each other, so any path is access-up, one overlay hop,
access-down.  Routers add fixed delay but never queue: contention lives at
the access links only.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ConfigurationError, UnknownPeerError

Range = tuple[float, float]


@dataclass(frozen=True)
class AttributeRanges:
    """Uniform min/max draw ranges for the per-peer attributes.

    Bandwidths are bits per second, delays are one-way milliseconds, disk
    sizes are bytes.  Down bandwidth is derived as ``down_bw_ratio`` times
    the drawn up bandwidth (asymmetric access link).
    """

    up_bw_bps: Range = (512_000.0, 2_048_000.0)
    cpu: Range = (1.0, 3.0)
    mem: Range = (0.5, 4.0)
    access_delay_ms: Range = (2.0, 20.0)
    overlay_delay_ms: Range = (5.0, 50.0)
    disk_capacity_bytes: Range = (50_000.0, 200_000.0)
    departure_prob: Range = (0.0, 0.0)
    down_bw_ratio: float = 4.0
    replica_slots: int = 8
    service_queue_cap: int = 16

    def validate(self) -> None:
        ranged = (
            "up_bw_bps", "cpu", "mem", "access_delay_ms", "overlay_delay_ms",
            "disk_capacity_bytes", "departure_prob",
        )
        for name in ranged:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigurationError(f"{name}: min {lo} exceeds max {hi}")
        for name in ranged[:-1]:
            if getattr(self, name)[0] <= 0:
                raise ConfigurationError(f"{name}: range must be strictly positive")
        lo, hi = self.departure_prob
        if lo < 0.0 or hi > 1.0:
            raise ConfigurationError("departure_prob: range must lie in [0, 1]")
        if self.down_bw_ratio <= 0:
            raise ConfigurationError("down_bw_ratio must be positive")
        if self.replica_slots < 0:
            raise ConfigurationError("replica_slots must be non-negative")
        if self.service_queue_cap < 1:
            raise ConfigurationError("service_queue_cap must be at least 1")


@dataclass
class PeerNode:
    """One peer, with normalized resource attributes and raw link speeds.

    ``up_bw``, ``cpu``, ``mem`` and ``access_latency`` are each divided by
    the fleet maximum at build time, so they lie in (0, 1] and the weight
    formula stays dimensionless.  ``disk_free`` is the only field that
    changes after construction (replica bookkeeping).
    """

    id: int
    up_bw: float
    cpu: float
    mem: float
    access_latency: float
    raw_up_bps: float
    raw_down_bps: float
    disk_capacity: int
    disk_free: int
    replica_slots: int
    departure_prob: float
    service_queue_cap: int


@dataclass
class Topology:
    """Peers plus the delay model.

    ``overlay_ms`` is a symmetric matrix with zero diagonal, indexed by
    peer id (one router per peer).  Access delays are one-way, split into
    an up and a down component per peer.
    """

    peers: dict[int, PeerNode]
    access_up_ms: dict[int, float]
    access_down_ms: dict[int, float]
    overlay_ms: list[list[float]]

    def to_dict(self) -> dict:
        """JSON-ready snapshot used by the dump subcommand."""
        return {
            "peers": [
                {
                    "id": p.id,
                    "up_bw": p.up_bw,
                    "cpu": p.cpu,
                    "mem": p.mem,
                    "access_latency": p.access_latency,
                    "raw_up_bps": p.raw_up_bps,
                    "raw_down_bps": p.raw_down_bps,
                    "disk_capacity": p.disk_capacity,
                    "disk_free": p.disk_free,
                    "replica_slots": p.replica_slots,
                    "departure_prob": p.departure_prob,
                    "service_queue_cap": p.service_queue_cap,
                }
                for p in (self.peers[pid] for pid in sorted(self.peers))
            ],
            "access_up_ms": {str(k): self.access_up_ms[k] for k in sorted(self.access_up_ms)},
            "access_down_ms": {str(k): self.access_down_ms[k] for k in sorted(self.access_down_ms)},
            "overlay_ms": self.overlay_ms,
        }


def build_topology(n_peers: int, rng_seed: int | str,
                   ranges: AttributeRanges | None = None) -> Topology:
    """Draw a fleet of ``n_peers`` peers and their delay model.

    Draw order is fixed and documented so a topology is reproducible from
    (seed, ranges) alone: for each peer id in ascending order draw
    up-bandwidth, cpu, mem, access up-delay, access down-delay, disk
    capacity, departure probability; then overlay delays for every pair
    i < j in row-major order.  The raw access latency used for the
    normalized ``access_latency`` attribute is the peer's up-delay plus
    down-delay.
    """
    if ranges is None:
        ranges = AttributeRanges()
    ranges.validate()
    if n_peers < 2:
        raise ConfigurationError("n_peers must be at least 2")

    rng = random.Random(rng_seed)
    raw = []
    for _ in range(n_peers):
        raw.append((
            rng.uniform(*ranges.up_bw_bps),
            rng.uniform(*ranges.cpu),
            rng.uniform(*ranges.mem),
            rng.uniform(*ranges.access_delay_ms),
            rng.uniform(*ranges.access_delay_ms),
            rng.uniform(*ranges.disk_capacity_bytes),
            rng.uniform(*ranges.departure_prob),
        ))
    overlay = [[0.0] * n_peers for _ in range(n_peers)]
    for i in range(n_peers):
        for j in range(i + 1, n_peers):
            d = rng.uniform(*ranges.overlay_delay_ms)
            overlay[i][j] = d
            overlay[j][i] = d

    max_bw = max(r[0] for r in raw)
    max_cpu = max(r[1] for r in raw)
    max_mem = max(r[2] for r in raw)
    max_al = max(r[3] + r[4] for r in raw)

    peers: dict[int, PeerNode] = {}
    access_up: dict[int, float] = {}
    access_down: dict[int, float] = {}
    for pid, (bw, cpu, mem, a_up, a_down, cap, dep) in enumerate(raw):
        capacity = int(cap)
        peers[pid] = PeerNode(
            id=pid,
            up_bw=bw / max_bw,
            cpu=cpu / max_cpu,
            mem=mem / max_mem,
            access_latency=(a_up + a_down) / max_al,
            raw_up_bps=bw,
            raw_down_bps=bw * ranges.down_bw_ratio,
            disk_capacity=capacity,
            disk_free=capacity,
            replica_slots=ranges.replica_slots,
            departure_prob=dep,
            service_queue_cap=ranges.service_queue_cap,
        )
        access_up[pid] = a_up
        access_down[pid] = a_down

    return Topology(peers=peers, access_up_ms=access_up,
                    access_down_ms=access_down, overlay_ms=overlay)


def e2e_delay(t: Topology, a: int, b: int) -> float:
    """One-way end-to-end delay in ms from peer ``a`` to peer ``b``.

    A peer talking to itself pays no network delay.
    """
    if a not in t.peers:
        raise UnknownPeerError(a)
    if b not in t.peers:
        raise UnknownPeerError(b)
    if a == b:
        return 0.0
    return t.access_up_ms[a] + t.overlay_ms[a][b] + t.access_down_ms[b]


def transfer_time(t: Topology, src: int, dst: int, nbytes: int) -> float:
    """Milliseconds to move ``nbytes`` from ``src`` to ``dst``.

    Serialization is bottlenecked by min(src up-bandwidth, dst
    down-bandwidth); propagation adds one e2e delay.
    """
    if nbytes < 0:
        raise ValueError("nbytes must be non-negative")
    delay = e2e_delay(t, src, dst)
    if src == dst:
        bw = t.peers[src].raw_up_bps
    else:
        bw = min(t.peers[src].raw_up_bps, t.peers[dst].raw_down_bps)
    if bw <= 0:
        raise ConfigurationError(f"non-positive bandwidth on path {src}->{dst}")
    return nbytes * 8.0 / bw * 1000.0 + delay
