"""Jaccard overlap, tiered weights, and single-channel re-ranking."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_features
from tierank.errors import EmptySetError, UnknownItemError
from tierank.index import FeatureMatrix, Metric, build_index
from tierank.rerank import (
    TIER3_LITERAL,
    JaccardValue,
    QueryGraph,
    jaccard,
    tier1_rerank,
    tier1_weights,
    tier2_weights,
    tier3_weights,
    tiered_rerank,
)
from tierank.scenarios import gen_outlier_scenario


# --- jaccard ----------------------------------------------------------------


def test_jaccard_planted_outlier_sets():
    # self-inclusive 5-sets from the planted scenario, spelled out by hand
    A, B, C, D, O, O1, O2, E, F, G, H, I = range(12)
    n_a = {A, O, B, C, D}
    assert jaccard(n_a, {O, A, B, O1, O2}) == JaccardValue(3, 7)
    assert jaccard(n_a, {B, A, O, E, F}) == JaccardValue(3, 7)
    assert jaccard(n_a, {C, A, F, H, G}) == JaccardValue(2, 8)
    assert jaccard(n_a, {D, A, C, H, I}) == JaccardValue(3, 7)


def test_jaccard_identical_sets():
    assert jaccard({1, 2, 3}, {1, 2, 3}).value == 1


def test_jaccard_disjoint_sets():
    assert jaccard({1, 2}, {3, 4}).value == 0


def test_jaccard_empty_set_rejected():
    with pytest.raises(EmptySetError):
        jaccard(set(), {1})


def test_jaccard_keeps_raw_counts():
    jv = jaccard({0, 1}, {0, 1, 2, 3, 4, 5, 6, 7})
    assert (jv.numerator, jv.denominator) == (2, 8)
    assert jv.value == Fraction(1, 4)
    assert float(jv) == 0.25


@settings(max_examples=100, deadline=None)
@given(
    st.frozensets(st.integers(0, 40), min_size=1, max_size=12),
    st.frozensets(st.integers(0, 40), min_size=1, max_size=12),
)
def test_jaccard_symmetry_and_range(a, b):
    ab = jaccard(a, b)
    ba = jaccard(b, a)
    assert ab == ba
    assert 0 <= ab.value <= 1
    assert (ab.value == 1) == (a == b)


# --- tier 1 -----------------------------------------------------------------


def test_tier1_query_edge_is_one():
    rng = np.random.default_rng(0)
    fm = random_features(rng, 15, dim=3)
    index = build_index(fm, k=4)
    t1 = tier1_weights(index, 7, alpha=1.0)
    assert t1.edges[7] == 1.0


def test_tier1_matches_set_arithmetic_oracle():
    rng = np.random.default_rng(1)
    fm = random_features(rng, 40, dim=4)
    index = build_index(fm, k=6)
    alpha = 0.9
    for query in (0, 11, 39):
        t1 = tier1_weights(index, query, alpha=alpha)
        members = set(index.neighbor_ids(query, 6).tolist())
        for item in t1.order:
            own = set(index.neighbor_ids(item, 6).tolist())
            inter = len(own & members)
            union = len(own | members)
            assert t1.edges[item] == alpha * (inter / union)


def test_tier1_alpha_never_changes_ordering():
    rng = np.random.default_rng(2)
    fm = random_features(rng, 30, dim=3)
    index = build_index(fm, k=8)
    base = tier1_rerank(index, 3, alpha=1.0).ids()
    for alpha in (1e-6, 0.5, 7.0, 1e6):
        assert tier1_rerank(index, 3, alpha=alpha).ids() == base


def test_tier1_unknown_query():
    rng = np.random.default_rng(3)
    fm = random_features(rng, 10, dim=2)
    index = build_index(fm, k=3)
    with pytest.raises(UnknownItemError):
        tier1_weights(index, 999)


# --- tier 2 -----------------------------------------------------------------


def test_tier2_all_candidates_connected():
    # self-inclusion forces a positive overlap for every candidate
    rng = np.random.default_rng(4)
    fm = random_features(rng, 25, dim=3)
    index = build_index(fm, k=5)
    t2 = tier2_weights(tier1_weights(index, 6))
    assert set(t2.edges.values()) == {1.0}


def test_tier2_zero_overlap_edge_drops():
    graph = QueryGraph(
        query=0,
        tier=1,
        edges={0: 1.0, 5: 0.0},
        order=(0, 5),
        k1=2,
        k2=2,
        overlap={0: JaccardValue(2, 2), 5: JaccardValue(0, 4)},
    )
    t2 = tier2_weights(graph)
    assert t2.edges == {0: 1.0, 5: 0.0}


# --- tier 3 -----------------------------------------------------------------


def test_tier3_saturated_candidate_scores_k2():
    rng = np.random.default_rng(5)
    fm = random_features(rng, 20, dim=3)
    index = build_index(fm, k=4)
    for query in range(20):
        t1 = tier1_weights(index, query)
        t3 = tier3_weights(index, query, tier2_weights(t1))
        # the query's own neighborhood lies fully inside the support
        assert t3.edges[query] == 4.0
        for item, w in t3.edges.items():
            assert w == int(w) and 0 <= w <= 4


def test_tier3_outlier_weight_bounded():
    scenario = gen_outlier_scenario(seed=0)
    index = build_index(scenario.features, k=scenario.k1, metric=Metric.L1)
    t1 = tier1_weights(index, scenario.query, k1=5, k2=3)
    t3 = tier3_weights(index, scenario.query, tier2_weights(t1))
    outlier = scenario.ids["O"]
    on_cluster = [scenario.ids[n] for n in ("B", "C", "D")]
    assert t3.edges[outlier] <= 2
    assert all(t3.edges[item] > t3.edges[outlier] for item in on_cluster)


def test_tier3_matches_double_loop_oracle():
    rng = np.random.default_rng(6)
    fm = random_features(rng, 35, dim=4)
    index = build_index(fm, k=5)
    for query in (2, 17, 30):
        t1 = tier1_weights(index, query)
        t2 = tier2_weights(t1)
        t3 = tier3_weights(index, query, t2)
        for item in t3.order:
            total = 0.0
            for nbr in index.neighbor_ids(item, 5).tolist():
                total += t2.edges.get(nbr, 0.0)
            assert t3.edges[item] == total


def test_tier3_literal_mode_is_query_independent():
    rng = np.random.default_rng(7)
    fm = random_features(rng, 30, dim=3)
    index = build_index(fm, k=6)
    t1 = tier1_weights(index, 4)
    t3 = tier3_weights(index, 4, tier2_weights(t1), mode=TIER3_LITERAL)
    assert set(t3.edges.values()) == {6.0}


# --- tiered rerank ----------------------------------------------------------


def test_rerank_singleton_collection():
    fm = FeatureMatrix(channel_name="one", ids=(5,), vectors=np.asarray([[0.0, 0.0]]))
    index = build_index(fm, k=3)
    assert tiered_rerank(index, 5).ids() == (5,)


def test_rerank_is_permutation_with_query_first():
    rng = np.random.default_rng(8)
    fm = random_features(rng, 40, dim=4)
    index = build_index(fm, k=7)
    for query in (0, 13, 39):
        ranked = tiered_rerank(index, query)
        assert ranked.ids()[0] == query
        assert sorted(ranked.ids()) == sorted(index.neighbor_ids(query, 7).tolist())


def test_rerank_deterministic():
    rng = np.random.default_rng(9)
    fm = random_features(rng, 28, dim=3)
    index = build_index(fm, k=6)
    assert tiered_rerank(index, 11).entries == tiered_rerank(index, 11).entries


def test_rerank_tie_break_prefers_distance_rank():
    scenario = gen_outlier_scenario(seed=0)
    index = build_index(scenario.features, k=scenario.k1, metric=Metric.L1)
    ranked = tiered_rerank(index, scenario.query, k1=scenario.k1, k2=scenario.k2)
    b, d = scenario.ids["B"], scenario.ids["D"]
    # B and D tie on both tier-3 and tier-1; B is nearer in the original list
    pos = {item: p for p, item in enumerate(ranked.ids())}
    assert pos[b] < pos[d]
