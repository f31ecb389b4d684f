"""End-to-end per-query re-ranking across one or more feature channels.

Single-channel runs emit the tiered re-ranked candidate list directly;
multi-channel runs fuse the per-channel tier-3 graphs and grow the final
list greedily. Out-of-sample queries are supported by injecting the query
as a virtual member of its own candidate set, so no index is rebuilt.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, EmptyChannelListError, FormatError
from .fusion import FusedGraph, TieredPairwise, fuse_graphs, greedy_select, greedy_select_product
from .index import FeatureMatrix, NeighborhoodIndex, knn_candidates
from .ranking import RankedList
from .rerank import TIER3_QUERY_ANCHORED, tiered_graph, tiered_rerank

VARIANT_SUM = "sum"
VARIANT_PRODUCT = "product"


@dataclass(frozen=True)
class Channel:
    """One feature channel ready for re-ranking."""

    name: str
    index: NeighborhoodIndex
    k1: int
    k2: int
    alpha: float = 1.0
    features: FeatureMatrix | None = None


def virtual_query_id(channels: Sequence[Channel], offset: int = 0) -> int:
    """An id guaranteed not to collide with any indexed item."""
    top = -1
    for ch in channels:
        top = max(top, max(ch.index.entries))
    return top + 1 + offset


def attach_virtual_query(channels: Sequence[Channel], vector: Iterable[float], vid: int) -> list[Channel]:
    """Insert an out-of-sample query vector as a virtual item on every channel.

    The virtual entry's neighbor list is the query itself at distance 0
    followed by its nearest stored items, mirroring a stored entry.
    """
    vec = np.asarray(vector, dtype=np.float64)
    out = []
    for ch in channels:
        if ch.features is None:
            raise FormatError(f"channel {ch.name!r} has no feature matrix for vector queries")
        if vec.shape[0] != ch.features.dim:
            raise DimensionError(
                f"query dim {vec.shape[0]} != channel {ch.name!r} dim {ch.features.dim}"
            )
        want = min(ch.index.k - 1, ch.features.n)
        if want > 0:
            ids, dists = knn_candidates(ch.features, vec, want, ch.index.metric)
        else:
            ids = np.empty(0, dtype=np.int64)
            dists = np.empty(0, dtype=np.float64)
        v_ids = np.concatenate(([vid], ids)).astype(np.int64)
        v_dists = np.concatenate(([0.0], dists))
        out.append(replace(ch, index=ch.index.with_virtual(vid, v_ids, v_dists)))
    return out


def fused_graph_for_query(
    channels: Sequence[Channel],
    query: int,
    mode: str = TIER3_QUERY_ANCHORED,
) -> FusedGraph:
    graphs = []
    scales = []
    for ch in channels:
        _, t3 = tiered_graph(ch.index, query, alpha=ch.alpha, k1=ch.k1, k2=ch.k2, mode=mode)
        graphs.append(t3)
        scales.append(ch.alpha)
    return fuse_graphs(graphs, scales=scales)


def rerank_query(
    channels: Sequence[Channel],
    query: int,
    k_final: int | None = None,
    mode: str = TIER3_QUERY_ANCHORED,
    variant: str = VARIANT_SUM,
) -> RankedList:
    """Re-rank one query; fuses channels when more than one is configured."""
    if len(channels) == 0:
        raise EmptyChannelListError("at least one channel required")
    if len(channels) == 1:
        ch = channels[0]
        return tiered_rerank(ch.index, query, alpha=ch.alpha, k1=ch.k1, k2=ch.k2, mode=mode)

    fused = fused_graph_for_query(channels, query, mode=mode)
    # name order matches fusion's accumulation order, so pairwise weights
    # from the query reproduce the fused edges exactly even under scaling
    by_name = sorted(channels, key=lambda ch: ch.name)
    pairwise = TieredPairwise(
        [(ch.index, ch.k1, ch.k2) for ch in by_name],
        candidates=sorted(fused.nodes),
        scales=[ch.alpha for ch in by_name],
    )
    if k_final is None:
        k_final = max(ch.k1 for ch in channels)
    if variant == VARIANT_SUM:
        final = greedy_select(fused, pairwise, k_final)
    elif variant == VARIANT_PRODUCT:
        final = greedy_select_product(fused, pairwise, k_final)
    else:
        raise ValueError(f"unknown selection variant {variant!r}")
    return final.to_ranked_list(tier="mfr")


def rerank_vector_query(
    channels: Sequence[Channel],
    vector: Iterable[float],
    k_final: int | None = None,
    mode: str = TIER3_QUERY_ANCHORED,
    variant: str = VARIANT_SUM,
    vid: int | None = None,
) -> RankedList:
    """Re-rank an out-of-sample query given as a raw vector."""
    if vid is None:
        vid = virtual_query_id(channels)
    extended = attach_virtual_query(channels, vector, vid)
    return rerank_query(extended, vid, k_final=k_final, mode=mode, variant=variant)


def batch_rerank(
    channels: Sequence[Channel],
    queries: Sequence[int],
    k_final: int | None = None,
    mode: str = TIER3_QUERY_ANCHORED,
    variant: str = VARIANT_SUM,
    jobs: int = 1,
) -> list[RankedList]:
    """Re-rank many queries; results come back in input order."""

    def one(query: int) -> RankedList:
        return rerank_query(channels, query, k_final=k_final, mode=mode, variant=variant)

    if jobs <= 1 or len(queries) <= 1:
        return [one(q) for q in queries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, queries))
