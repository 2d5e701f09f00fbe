"""Query workload generation: Poisson arrivals, Zipf content popularity."""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import ConfigurationError
from .placement import QueryRecord


@dataclass(frozen=True)
class WorkloadConfig:
    query_rate: float = 400.0      # aggregate queries per second
    payload_bytes: int = 1_000     # response (content item) size
    zipf_s: float = 1.0            # popularity skew; 0 means uniform
    duration_s: float = 10.0
    warmup_s: float = 2.0          # excluded from metrics
    churn_rate: float = 0.0        # peer leave events per second
    catalog_size: int = 100        # one origin item per selected peer
    offline_mean_s: float = 5.0    # mean time a departed peer stays away

    def validate(self) -> None:
        if self.query_rate <= 0:
            raise ConfigurationError("workload.query_rate must be positive")
        if self.payload_bytes < 1:
            raise ConfigurationError("workload.payload_bytes must be at least 1")
        if self.zipf_s < 0:
            raise ConfigurationError("workload.zipf_s must be non-negative")
        if self.warmup_s < 0:
            raise ConfigurationError("workload.warmup_s must be non-negative")
        if self.duration_s <= self.warmup_s:
            raise ConfigurationError(
                "workload.duration_s must exceed workload.warmup_s")
        if self.churn_rate < 0:
            raise ConfigurationError("workload.churn_rate must be non-negative")
        if self.catalog_size < 1:
            raise ConfigurationError("workload.catalog_size must be at least 1")
        if self.offline_mean_s <= 0:
            raise ConfigurationError("workload.offline_mean_s must be positive")


class ZipfSampler:
    """Exact finite Zipf sampler over a ranked catalog.

    Rank k (1-based position in the id list) carries probability
    proportional to 1 / k**s.  Sampling inverts the cumulative weights, so
    the empirical distribution matches the pmf exactly in the limit.
    """

    def __init__(self, content_ids: Sequence[str], s: float):
        if not content_ids:
            raise ConfigurationError("catalog must be non-empty")
        self.content_ids = list(content_ids)
        self.s = s
        weights = [1.0 / (k ** s) for k in range(1, len(content_ids) + 1)]
        self._cum = list(itertools.accumulate(weights))
        self._total = self._cum[-1]

    def pmf(self, rank: int) -> float:
        """Exact probability of the 1-based rank."""
        return (1.0 / rank ** self.s) / self._total

    def sample(self, rng: random.Random) -> str:
        r = rng.random() * self._total
        return self.content_ids[bisect.bisect_left(self._cum, r)]


def generate_queries(cfg: WorkloadConfig, content_ids: Sequence[str],
                     peer_ids: Sequence[int], seed: int | str) -> Iterator[QueryRecord]:
    """Yield the scenario's query stream in arrival order.

    Arrivals are a seeded Poisson process at the configured aggregate rate;
    content follows the Zipf sampler; the requesting node is uniform over
    the peers.  The stream ends at the scenario duration.
    """
    rng = random.Random(seed)
    sampler = ZipfSampler(content_ids, cfg.zipf_s)
    peers = list(peer_ids)
    end_ms = cfg.duration_s * 1000.0
    t = 0.0
    while True:
        t += rng.expovariate(cfg.query_rate) * 1000.0
        if t >= end_ms:
            return
        yield QueryRecord(nid=rng.choice(peers), ckwd=sampler.sample(rng), time=t)
