"""Single-channel re-ranking over tiered query-centric neighborhood graphs.

Tier 1 carries Jaccard overlap weights between the query's candidate set
and each candidate's own neighborhood, tier 2 binarizes tier 1, and tier 3
counts, for each candidate, how many of its neighbors are tier-2-connected
to the query. Sorting by the tier-3 counts demotes candidates whose own
neighborhoods point away from the query's, which is what makes the scheme
robust to outliers sitting next to the query.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySetError, FormatError
from .index import NeighborhoodIndex
from .ranking import RankedList

TIER3_QUERY_ANCHORED = "query-anchored"
TIER3_LITERAL = "literal"


@dataclass(frozen=True)
class JaccardValue:
    """Exact set-overlap ratio, kept as the raw |intersection| / |union| counts."""

    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if self.denominator <= 0 or self.numerator < 0 or self.numerator > self.denominator:
            raise ValueError(f"invalid Jaccard counts {self.numerator}/{self.denominator}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator


def jaccard(a: Iterable[int], b: Iterable[int]) -> JaccardValue:
    """|a ∩ b| / |a ∪ b| for two non-empty id sets."""
    sa = frozenset(a)
    sb = frozenset(b)
    if not sa or not sb:
        raise EmptySetError("jaccard requires two non-empty sets")
    inter = len(sa & sb)
    union = len(sa) + len(sb) - inter
    return JaccardValue(numerator=inter, denominator=union)


@dataclass(frozen=True)
class QueryGraph:
    """Weighted edges from one query to its candidate set, at one tier.

    ``order`` preserves the candidates' original distance ranking, which
    later stages use for tie-breaking. Tier-1 graphs additionally carry the
    exact Jaccard value per edge.
    """

    query: int
    tier: int
    edges: dict[int, float]
    order: tuple[int, ...]
    k1: int
    k2: int
    channel: str = ""
    alpha: float = 1.0
    overlap: dict[int, JaccardValue] | None = None

    def rank_of(self, item: int) -> int:
        return self.order.index(item)


def _resolve_k(index: NeighborhoodIndex, k1: int | None, k2: int | None) -> tuple[int, int]:
    k1 = index.k if k1 is None else k1
    k2 = index.k if k2 is None else k2
    if k1 < 1 or k2 < 1:
        raise ValueError("k1 and k2 must be >= 1")
    if k1 > index.k or k2 > index.k:
        raise ValueError(f"k1/k2 cannot exceed the index k={index.k}")
    return k1, k2


def _overlap_counts(rows: list, members: Sequence[int]) -> list[int]:
    """|row ∩ members| for every neighbor-id row; vectorized when rows align."""
    member_arr = np.sort(np.asarray(list(members), dtype=np.int64))
    lengths = {row.shape[0] for row in rows}
    if len(lengths) == 1 and rows:
        matrix = np.vstack(rows)
        return np.isin(matrix, member_arr).sum(axis=1).tolist()
    return [int(np.isin(row, member_arr).sum()) for row in rows]


def tier1_weights(
    index: NeighborhoodIndex,
    query: int,
    alpha: float = 1.0,
    k1: int | None = None,
    k2: int | None = None,
) -> QueryGraph:
    """Jaccard-weighted edges from the query to every candidate, scaled by alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    k1, k2 = _resolve_k(index, k1, k2)
    candidates = tuple(int(i) for i in index.neighbor_ids(query, k1))
    rows = [index.neighbor_ids(item, k2) for item in candidates]
    counts = _overlap_counts(rows, candidates)
    edges: dict[int, float] = {}
    overlap: dict[int, JaccardValue] = {}
    for item, row, inter in zip(candidates, rows, counts):
        union = row.shape[0] + len(candidates) - inter
        jv = JaccardValue(numerator=inter, denominator=union)
        overlap[item] = jv
        edges[item] = alpha * (jv.numerator / jv.denominator)
    return QueryGraph(
        query=query,
        tier=1,
        edges=edges,
        order=candidates,
        k1=k1,
        k2=k2,
        channel=index.channel_name,
        alpha=alpha,
        overlap=overlap,
    )


def tier2_weights(tier1: QueryGraph) -> QueryGraph:
    """Binarize tier 1: weight 1 iff the candidate overlaps the query's set at all."""
    if tier1.tier != 1 or tier1.overlap is None:
        raise FormatError("tier2_weights expects a tier-1 graph")
    members = frozenset(tier1.order)
    edges = {
        item: 1.0 if (tier1.overlap[item].numerator > 0 and item in members) else 0.0
        for item in tier1.order
    }
    return QueryGraph(
        query=tier1.query,
        tier=2,
        edges=edges,
        order=tier1.order,
        k1=tier1.k1,
        k2=tier1.k2,
        channel=tier1.channel,
        alpha=tier1.alpha,
    )


def tier3_weights(
    index: NeighborhoodIndex,
    query: int,
    tier2: QueryGraph,
    mode: str = TIER3_QUERY_ANCHORED,
) -> QueryGraph:
    """Integer edge weights counting tier-2 support inside each candidate's neighborhood.

    The default mode scores candidate x by how many of x's neighbors are
    tier-2-connected to the query. The "literal" mode instead re-anchors the
    tier-2 weights at x itself, which is independent of the query and is
    kept only as a documented comparison switch.
    """
    if tier2.tier != 2:
        raise FormatError("tier3_weights expects a tier-2 graph")
    if tier2.query != query:
        raise FormatError("tier-2 graph belongs to a different query")
    k1, k2 = tier2.k1, tier2.k2
    edges: dict[int, float] = {}
    if mode == TIER3_QUERY_ANCHORED:
        binary = all(w in (0.0, 1.0) for w in tier2.edges.values())
        if binary:
            support = [item for item, w in tier2.edges.items() if w == 1.0]
            rows = [index.neighbor_ids(item, k2) for item in tier2.order]
            counts = _overlap_counts(rows, support)
            for item, count in zip(tier2.order, counts):
                edges[item] = float(count)
        else:
            for item in tier2.order:
                total = 0.0
                for nbr in index.neighbor_ids(item, k2).tolist():
                    total += tier2.edges.get(nbr, 0.0)
                edges[item] = total
    elif mode == TIER3_LITERAL:
        for item in tier2.order:
            own_t1 = tier1_weights(index, item, alpha=tier2.alpha, k1=k1, k2=k2)
            own_t2 = tier2_weights(own_t1)
            total = 0.0
            for nbr in index.neighbor_ids(item, k2).tolist():
                total += own_t2.edges.get(nbr, 0.0)
            edges[item] = total
    else:
        raise ValueError(f"unknown tier-3 mode {mode!r}")
    return QueryGraph(
        query=query,
        tier=3,
        edges=edges,
        order=tier2.order,
        k1=k1,
        k2=k2,
        channel=tier2.channel,
        alpha=tier2.alpha,
    )


def tiered_graph(
    index: NeighborhoodIndex,
    query: int,
    alpha: float = 1.0,
    k1: int | None = None,
    k2: int | None = None,
    mode: str = TIER3_QUERY_ANCHORED,
) -> tuple[QueryGraph, QueryGraph]:
    """Convenience: (tier-1 graph, tier-3 graph) for one query on one channel."""
    t1 = tier1_weights(index, query, alpha=alpha, k1=k1, k2=k2)
    t2 = tier2_weights(t1)
    t3 = tier3_weights(index, query, t2, mode=mode)
    return t1, t3


def tier1_rerank(
    index: NeighborhoodIndex,
    query: int,
    alpha: float = 1.0,
    k1: int | None = None,
    k2: int | None = None,
) -> RankedList:
    """Candidates sorted by descending tier-1 weight (single-tier re-ranking)."""
    t1 = tier1_weights(index, query, alpha=alpha, k1=k1, k2=k2)
    assert t1.overlap is not None
    order = sorted(
        t1.order,
        key=lambda item: (-t1.overlap[item].value, t1.rank_of(item), item),
    )
    entries = tuple((item, t1.edges[item]) for item in order)
    return RankedList(query=query, entries=entries, tier="1", channel=index.channel_name)


def tiered_rerank(
    index: NeighborhoodIndex,
    query: int,
    alpha: float = 1.0,
    k1: int | None = None,
    k2: int | None = None,
    mode: str = TIER3_QUERY_ANCHORED,
) -> RankedList:
    """Full three-tier re-ranking of the query's candidate set.

    Candidates sort by descending tier-3 weight; ties fall back to
    descending tier-1 weight, then the original distance rank, then
    ascending id. The query itself is always first, and the output is a
    permutation of the candidate set.
    """
    t1, t3 = tiered_graph(index, query, alpha=alpha, k1=k1, k2=k2, mode=mode)
    assert t1.overlap is not None
    rest = [item for item in t3.order if item != query]
    rest.sort(
        key=lambda item: (
            -t3.edges[item],
            -t1.overlap[item].value,
            t3.rank_of(item),
            item,
        )
    )
    ordered = [query] + rest
    entries = tuple((item, t3.edges[item]) for item in ordered)
    return RankedList(query=query, entries=entries, tier="3", channel=index.channel_name)
