"""Sanity checks on the timing harness itself."""

from __future__ import annotations

import pytest

from tierank.bench import bench_rerank, build_bench_channels, restricted_channels


def test_bench_requires_enough_samples():
    channels = build_bench_channels(n=200, m=1, k=4, dim=2, seed=0)
    with pytest.raises(ValueError):
        bench_rerank(channels, queries=[0, 1, 2], repetitions=1)


def test_bench_cost_grows_with_k():
    # wider neighborhoods mean strictly more online work per query
    channels = build_bench_channels(n=2000, m=2, k=50, dim=4, seed=3)
    queries = list(range(0, 2000, 19))[:100]
    narrow = bench_rerank(restricted_channels(channels, k=5, m=2), queries, 1, k_final=5)
    wide = bench_rerank(restricted_channels(channels, k=50, m=2), queries, 1, k_final=50)
    assert wide.median_ms > narrow.median_ms


def test_bench_reports_sample_count():
    channels = build_bench_channels(n=150, m=1, k=4, dim=2, seed=1)
    queries = list(range(60))
    result = bench_rerank(channels, queries, repetitions=2, k_final=4, label="tiny")
    assert result.samples == 120
    assert result.mean_ms > 0 and result.median_ms > 0
    assert result.row().startswith("tiny\t150\t1\t4\t")
