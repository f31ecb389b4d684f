"""Synthetic scenario generators with planted neighborhood relations.

Each generator lays out a small point cloud whose exact-KNN structure is
known in advance, applies a seeded jitter that is small enough to keep
every planted distance ordering intact, then rebuilds the index and
verifies every planted relation before returning. A failed verification
raises ScenarioError rather than silently handing back a broken fixture.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ScenarioError
from .evaluation import GroundTruth
from .fusion import TieredPairwise, fuse_graphs, greedy_select
from .index import FeatureMatrix, Metric, NeighborhoodIndex, build_index
from .rerank import tier1_weights, tiered_graph, tiered_rerank

# ---------------------------------------------------------------------------
# Outlier-next-to-the-query scenario
#
# One elongated cluster A..I plus an outlier O sitting close to the query A,
# with two satellites O1, O2 that are close to O only. At list size 5 the
# planted neighbor sets give O the same first-tier overlap as honest cluster
# members (3/7), which is exactly the failure mode the tiered re-ranking is
# meant to fix: with a tight candidate-side neighborhood (k2=3) the outlier's
# own neighbors point away from A's candidate set and its third-tier count
# collapses below every cluster member's.
# ---------------------------------------------------------------------------

_OUTLIER_LABELS = {
    "A": 0, "B": 1, "C": 2, "D": 3, "E": 4, "F": 5,
    "G": 6, "H": 7, "I": 8, "O": 9, "O1": 10, "O2": 11,
}

_OUTLIER_COORDS = {
    "A": (0.00, 0.00),
    "B": (1.40, 0.00),
    "C": (0.00, 1.50),
    "D": (-1.25, 0.70),
    "E": (3.05, 0.30),
    "F": (0.95, 1.85),
    "G": (0.85, 2.45),
    "H": (-0.55, 2.60),
    "I": (-2.60, 1.50),
    "O": (0.60, -1.05),
    "O1": (0.70, -2.15),
    "O2": (0.30, -2.15),
}

# smallest planted distance margin is 0.10; a per-coordinate jitter of
# 0.008 moves any L1 distance by at most 0.032 and cannot flip an ordering
_OUTLIER_JITTER = 0.008

_OUTLIER_K1 = 5
_OUTLIER_K2 = 3

_OUTLIER_TARGET_SETS = {
    "A": {"A", "B", "C", "O", "D"},
    "O": {"O", "O1", "O2", "A", "B"},
    "B": {"B", "A", "O", "E", "F"},
    "C": {"C", "F", "A", "H", "G"},
    "D": {"D", "A", "C", "I", "H"},
}

_OUTLIER_TARGET_PREFIXES = {
    "O": {"O", "O1", "O2"},
    "B": {"B", "A", "O"},
    "C": {"C", "F", "A"},
    "D": {"D", "A", "C"},
}

_OUTLIER_TARGET_JACCARD = {
    "O": (3, 7),
    "B": (3, 7),
    "C": (2, 8),
    "D": (3, 7),
}


@dataclass(frozen=True)
class OutlierScenario:
    features: FeatureMatrix
    truth: GroundTruth
    query: int
    k1: int
    k2: int
    ids: dict[str, int]
    manifest: dict


def _jittered_matrix(
    coords: dict[str, tuple[float, float]],
    labels: dict[str, int],
    rng: np.random.Generator,
    jitter: float,
    channel: str,
) -> FeatureMatrix:
    names = sorted(labels, key=labels.get)
    base = np.asarray([coords[n] for n in names], dtype=np.float64)
    base = base + rng.uniform(-jitter, jitter, size=base.shape)
    return FeatureMatrix(channel_name=channel, ids=tuple(labels[n] for n in names), vectors=base)


def _neighbor_set(index: NeighborhoodIndex, item: int, k: int) -> frozenset[int]:
    return frozenset(index.neighbor_ids(item, k).tolist())


def gen_outlier_scenario(seed: int = 0) -> OutlierScenario:
    """Point cloud where an off-cluster item sits right next to the query."""
    rng = np.random.default_rng(seed)
    ids = dict(_OUTLIER_LABELS)
    features = _jittered_matrix(_OUTLIER_COORDS, ids, rng, _OUTLIER_JITTER, "plane")
    labels = {ids[name]: (1 if name.startswith("O") else 0) for name in ids}
    truth = GroundTruth(labels=labels)
    query = ids["A"]

    index = build_index(features, k=_OUTLIER_K1, metric=Metric.L1)

    for name, target in _OUTLIER_TARGET_SETS.items():
        got = _neighbor_set(index, ids[name], _OUTLIER_K1)
        want = frozenset(ids[n] for n in target)
        if got != want:
            raise ScenarioError(f"planted {_OUTLIER_K1}-set for {name} is {got}, wanted {want}")
    for name, target in _OUTLIER_TARGET_PREFIXES.items():
        got = _neighbor_set(index, ids[name], _OUTLIER_K2)
        want = frozenset(ids[n] for n in target)
        if got != want:
            raise ScenarioError(f"planted {_OUTLIER_K2}-prefix for {name} is {got}, wanted {want}")

    t1 = tier1_weights(index, query)
    assert t1.overlap is not None
    for name, (num, den) in _OUTLIER_TARGET_JACCARD.items():
        got = t1.overlap[ids[name]]
        if got.value != Fraction(num, den) or (got.numerator, got.denominator) != (num, den):
            raise ScenarioError(
                f"overlap for {name} is {got.numerator}/{got.denominator}, wanted {num}/{den}"
            )

    ranked = tiered_rerank(index, query, k1=_OUTLIER_K1, k2=_OUTLIER_K2)
    pos = {item: p for p, item in enumerate(ranked.ids())}
    outlier = ids["O"]
    for name in ("B", "C", "D"):
        if pos[outlier] <= pos[ids[name]]:
            raise ScenarioError(f"outlier not demoted below {name}: {ranked.ids()}")

    manifest = {
        "scenario": "outlier",
        "seed": seed,
        "query": query,
        "point_ids": ids,
        "classes": {name: labels[ids[name]] for name in ids},
        "index_k": _OUTLIER_K1,
        "rerank_k1": _OUTLIER_K1,
        "rerank_k2": _OUTLIER_K2,
        "planted_neighbor_sets": {n: sorted(_OUTLIER_TARGET_SETS[n]) for n in _OUTLIER_TARGET_SETS},
        "planted_tight_prefixes": {
            n: sorted(_OUTLIER_TARGET_PREFIXES[n]) for n in _OUTLIER_TARGET_PREFIXES
        },
        "overlap_vs_query": {n: list(_OUTLIER_TARGET_JACCARD[n]) for n in _OUTLIER_TARGET_JACCARD},
        "tiered_order": [int(i) for i in ranked.ids()],
    }
    return OutlierScenario(
        features=features,
        truth=truth,
        query=query,
        k1=_OUTLIER_K1,
        k2=_OUTLIER_K2,
        ids=ids,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# Two adjacent clusters scenario
#
# Channel 1 places clusters M1 = {A, C, D, P1, P2} and M2 = {B, E, F, Q1}
# with touching margins, so the boundary item B of the other cluster scores
# a higher tier-3 weight toward the query A than A's own clustermate D.
# Channel 2 separates the clusters cleanly. Fusing both channels and growing
# the list greedily pulls C and D above B.
# ---------------------------------------------------------------------------

_MANIFOLD_LABELS = {
    "A": 0, "B": 1, "C": 2, "D": 3, "E": 4, "F": 5, "P1": 6, "P2": 7, "Q1": 8,
}

_MANIFOLD_CH1_X = {
    "A": 0.0, "B": 1.0, "C": -0.8, "D": -1.9, "E": 2.1,
    "F": 3.0, "P1": -2.7, "P2": -3.2, "Q1": 3.6,
}

_MANIFOLD_CH2_X = {
    "A": 0.0, "C": 0.35, "D": 0.72, "P1": 1.12, "P2": 1.55,
    "B": 100.0, "E": 100.33, "F": 100.67, "Q1": 101.05,
}

_MANIFOLD_JITTER = 0.015
_MANIFOLD_K = 4

_MANIFOLD_CH1_SETS = {
    "A": {"A", "C", "B", "D"},
    "B": {"B", "A", "E", "C"},
    "C": {"C", "A", "D", "B"},
    "D": {"D", "P1", "C", "P2"},
}

_MANIFOLD_CH2_SETS = {
    "A": {"A", "C", "D", "P1"},
    "B": {"B", "E", "F", "Q1"},
    "C": {"C", "A", "D", "P1"},
    "D": {"D", "C", "P1", "A"},
    "P1": {"P1", "D", "P2", "C"},
}


@dataclass(frozen=True)
class TwoManifoldScenario:
    channels: tuple[FeatureMatrix, FeatureMatrix]
    truth: GroundTruth
    query: int
    k1: int
    k2: int
    ids: dict[str, int]
    manifest: dict


def gen_two_manifold_scenario(seed: int = 0) -> TwoManifoldScenario:
    """Two adjacent clusters whose margins touch in the first channel."""
    rng = np.random.default_rng(seed)
    ids = dict(_MANIFOLD_LABELS)
    coords1 = {n: (x, 0.0) for n, x in _MANIFOLD_CH1_X.items()}
    coords2 = {n: (x, 0.0) for n, x in _MANIFOLD_CH2_X.items()}
    ch1 = _jittered_matrix(coords1, ids, rng, _MANIFOLD_JITTER, "boundary")
    ch2 = _jittered_matrix(coords2, ids, rng, _MANIFOLD_JITTER, "separated")
    labels = {ids[n]: (0 if n in {"A", "C", "D", "P1", "P2"} else 1) for n in ids}
    truth = GroundTruth(labels=labels)
    query = ids["A"]
    k = _MANIFOLD_K

    idx1 = build_index(ch1, k=k, metric=Metric.L1)
    idx2 = build_index(ch2, k=k, metric=Metric.L1)
    for name, target in _MANIFOLD_CH1_SETS.items():
        got = _neighbor_set(idx1, ids[name], k)
        want = frozenset(ids[n] for n in target)
        if got != want:
            raise ScenarioError(f"channel-1 set for {name} is {got}, wanted {want}")
    for name, target in _MANIFOLD_CH2_SETS.items():
        got = _neighbor_set(idx2, ids[name], k)
        want = frozenset(ids[n] for n in target)
        if got != want:
            raise ScenarioError(f"channel-2 set for {name} is {got}, wanted {want}")

    _, t3_ch1 = tiered_graph(idx1, query)
    w = {n: t3_ch1.edges[ids[n]] for n in ("B", "C", "D")}
    if not (w["C"] > w["B"] > w["D"]):
        raise ScenarioError(f"channel-1 boundary weights out of order: {w}")

    single = tiered_rerank(idx1, query)
    pos1 = {item: p for p, item in enumerate(single.ids())}
    if pos1[ids["B"]] >= pos1[ids["D"]]:
        raise ScenarioError("single-channel list does not rank B above D")

    _, t3_ch2 = tiered_graph(idx2, query)
    fused = fuse_graphs([t3_ch1, t3_ch2])
    pairwise = TieredPairwise([(idx1, k, k), (idx2, k, k)], candidates=sorted(fused.nodes))
    final = greedy_select(fused, pairwise, k=len(fused.nodes) - 1)
    pos2 = {item: p for p, item in enumerate(final.items)}
    if not (pos2[ids["C"]] < pos2[ids["B"]] and pos2[ids["D"]] < pos2[ids["B"]]):
        raise ScenarioError(f"fused selection does not demote B: {final.items}")

    toward = lambda u, n: pairwise(ids[u], ids[n])  # noqa: E731
    lhs = toward("D", "C") + toward("D", "A")
    rhs = toward("B", "C") + toward("B", "A")
    if not lhs > rhs:
        raise ScenarioError(f"fused pair sums violate planted inequality: {lhs} <= {rhs}")

    manifest = {
        "scenario": "two-manifold",
        "seed": seed,
        "query": query,
        "point_ids": ids,
        "classes": {n: labels[ids[n]] for n in ids},
        "index_k": k,
        "rerank_k1": k,
        "rerank_k2": k,
        "channel_1_sets": {n: sorted(_MANIFOLD_CH1_SETS[n]) for n in _MANIFOLD_CH1_SETS},
        "channel_2_sets": {n: sorted(_MANIFOLD_CH2_SETS[n]) for n in _MANIFOLD_CH2_SETS},
        "channel_1_weights_vs_query": w,
        "single_channel_order": [int(i) for i in single.ids()],
        "fused_order": [int(i) for i in final.items],
        "fused_pair_sums": {"from_D": lhs, "from_B": rhs},
    }
    return TwoManifoldScenario(
        channels=(ch1, ch2),
        truth=truth,
        query=query,
        k1=k,
        k2=k,
        ids=ids,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# Statistical fixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelatedTrial:
    """A synthetic index whose neighbor slots are correlated draws.

    The query's candidate list and every candidate's own neighbor list fill
    each non-self slot from the query's candidate set with probability p,
    otherwise from fresh outside items. Both the share of in-class
    candidates and the normalized tier-3 weight then estimate the same
    underlying probability, which is what the expectation check exploits.
    """

    index: NeighborhoodIndex
    query: int
    members: tuple[int, ...]
    in_class: frozenset[int]
    k: int
    p: float


def gen_correlated_trial(rng: np.random.Generator, k: int, p: float) -> CorrelatedTrial:
    if k < 2:
        raise ValueError("k must be >= 2")
    query = 0
    members = tuple(range(1, k))
    next_outside = k

    n_in = int(rng.binomial(k - 1, p))
    in_members = rng.choice(len(members), size=n_in, replace=False) if n_in else []
    in_class = frozenset(members[int(i)] for i in in_members)

    entries: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def add_entry(owner: int, others: Sequence[int]) -> None:
        ids = np.asarray([owner] + list(others), dtype=np.int64)
        dists = np.arange(ids.shape[0], dtype=np.float64)
        ids.setflags(write=False)
        dists.setflags(write=False)
        entries[owner] = (ids, dists)

    add_entry(query, members)
    cknns = (query,) + members
    for member in members:
        n_linked = int(rng.binomial(k - 1, p))
        pool = [item for item in cknns if item != member]
        picks = rng.choice(len(pool), size=n_linked, replace=False) if n_linked else []
        linked = [pool[int(i)] for i in picks]
        outside = list(range(next_outside, next_outside + (k - 1 - n_linked)))
        next_outside += len(outside)
        add_entry(member, linked + outside)

    index = NeighborhoodIndex(channel_name="correlated", k=k, metric=Metric.L1, entries=entries)
    return CorrelatedTrial(
        index=index, query=query, members=members, in_class=in_class, k=k, p=p
    )


def gen_trend_channels(
    rng: np.random.Generator,
    n_classes: int = 8,
    class_size: int = 10,
    n_channels: int = 4,
    dim: int = 4,
    noise: float = 1.0,
) -> tuple[list[FeatureMatrix], GroundTruth]:
    """Independent equally-noisy channels over one labeled collection.

    Every channel draws its own class prototypes and its own per-item
    noise, so the channels carry independent evidence of equal quality.
    """
    n = n_classes * class_size
    labels = {item: item // class_size for item in range(n)}
    truth = GroundTruth(labels=labels)
    channels = []
    for c in range(n_channels):
        prototypes = rng.normal(0.0, 1.0, size=(n_classes, dim))
        vectors = np.empty((n, dim))
        for item in range(n):
            vectors[item] = prototypes[labels[item]] + rng.normal(0.0, noise, size=dim)
        channels.append(
            FeatureMatrix(channel_name=f"trend{c}", ids=tuple(range(n)), vectors=vectors)
        )
    return channels, truth
