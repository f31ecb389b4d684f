"""Wall-clock benchmarking of the per-query re-ranking path.

Index construction happens offline and is excluded from the timings; what
is measured is the full online step per query: tiered graphs per channel,
fusion, and greedy selection. Times are reported per query in
milliseconds, from warmed caches, over at least 100 samples.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .index import FeatureMatrix, Metric, build_index
from .pipeline import Channel, rerank_query


@dataclass(frozen=True)
class BenchResult:
    label: str
    n: int
    k: int
    m: int
    samples: int
    mean_ms: float
    median_ms: float

    def row(self) -> str:
        return (
            f"{self.label}\t{self.n}\t{self.m}\t{self.k}\t"
            f"{self.mean_ms:.4f}\t{self.median_ms:.4f}\t{self.samples}"
        )


def make_bench_collection(
    n: int,
    dim: int = 4,
    n_classes: int = 50,
    seed: int = 0,
    channel_name: str = "bench",
    noise: float = 0.6,
) -> FeatureMatrix:
    """Gaussian class blobs sized for timing runs."""
    rng = np.random.default_rng(seed)
    prototypes = rng.normal(0.0, 1.0, size=(n_classes, dim))
    classes = rng.integers(0, n_classes, size=n)
    vectors = prototypes[classes] + rng.normal(0.0, noise, size=(n, dim))
    return FeatureMatrix(channel_name=channel_name, ids=tuple(range(n)), vectors=vectors)


def build_bench_channels(
    n: int,
    m: int,
    k: int,
    dim: int = 4,
    seed: int = 0,
    metric: Metric = Metric.L1,
) -> list[Channel]:
    """Build m independent synthetic channels, each indexed at k."""
    channels = []
    for c in range(m):
        features = make_bench_collection(n, dim=dim, seed=seed + 1000 * c, channel_name=f"bench{c}")
        index = build_index(features, k=k, metric=metric)
        channels.append(Channel(name=f"bench{c}", index=index, k1=k, k2=k, features=features))
    return channels


def bench_rerank(
    channels: Sequence[Channel],
    queries: Sequence[int],
    repetitions: int = 1,
    k_final: int | None = None,
    label: str = "bench",
) -> BenchResult:
    """Per-query wall time of the online rerank+fusion step.

    Runs one untimed warmup pass over all queries, then times each query
    `repetitions` times. Requires at least 100 timed samples.
    """
    samples = len(queries) * repetitions
    if samples < 100:
        raise ValueError(f"need >= 100 timed samples, got {samples}")
    for q in queries:
        rerank_query(channels, q, k_final=k_final)

    times_ms = []
    for _ in range(repetitions):
        for q in queries:
            start = time.perf_counter()
            rerank_query(channels, q, k_final=k_final)
            times_ms.append((time.perf_counter() - start) * 1e3)

    any_channel = channels[0]
    return BenchResult(
        label=label,
        n=any_channel.index.n,
        k=max(ch.k1 for ch in channels),
        m=len(channels),
        samples=len(times_ms),
        mean_ms=statistics.fmean(times_ms),
        median_ms=statistics.median(times_ms),
    )


def restricted_channels(channels: Sequence[Channel], k: int, m: int) -> list[Channel]:
    """Reuse built indexes at a smaller k (neighbor lists are prefix-stable)."""
    picked = list(channels)[:m]
    return [
        Channel(name=ch.name, index=ch.index, k1=k, k2=k, alpha=ch.alpha, features=ch.features)
        for ch in picked
    ]
