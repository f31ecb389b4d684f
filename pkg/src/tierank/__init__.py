"""Tiered neighborhood-graph re-ranking for nearest-neighbor retrieval."""

from .errors import (
    ClassSizeError,
    DegenerateError,
    DimensionError,
    EmptyChannelListError,
    EmptySetError,
    FileAccessError,
    FormatError,
    QueryMismatchError,
    ScenarioError,
    SizeError,
    TierankError,
    UnknownItemError,
    ZeroVectorError,
)
from .evaluation import GroundTruth, MetricReport, ns_score, precision_at, recall_at
from .fusion import (
    CorrelationEstimate,
    FusedGraph,
    TieredPairwise,
    correlation_estimate,
    fuse_graphs,
    greedy_select,
    greedy_select_product,
)
from .index import (
    FeatureMatrix,
    Metric,
    NeighborhoodIndex,
    build_index,
    distance,
    load_features,
    load_index,
    query_knn,
    save_index,
)
from .pipeline import Channel, batch_rerank, rerank_query, rerank_vector_query
from .ranking import FinalRanking, RankedList, read_rankings_tsv, write_rankings_tsv
from .rerank import (
    JaccardValue,
    QueryGraph,
    jaccard,
    tier1_rerank,
    tier1_weights,
    tier2_weights,
    tier3_weights,
    tiered_rerank,
)

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ClassSizeError",
    "CorrelationEstimate",
    "DegenerateError",
    "DimensionError",
    "EmptyChannelListError",
    "EmptySetError",
    "FeatureMatrix",
    "FileAccessError",
    "FinalRanking",
    "FormatError",
    "FusedGraph",
    "GroundTruth",
    "JaccardValue",
    "Metric",
    "MetricReport",
    "NeighborhoodIndex",
    "QueryGraph",
    "QueryMismatchError",
    "RankedList",
    "ScenarioError",
    "SizeError",
    "TierankError",
    "TieredPairwise",
    "UnknownItemError",
    "ZeroVectorError",
    "batch_rerank",
    "build_index",
    "correlation_estimate",
    "distance",
    "fuse_graphs",
    "greedy_select",
    "greedy_select_product",
    "jaccard",
    "load_features",
    "load_index",
    "ns_score",
    "precision_at",
    "query_knn",
    "read_rankings_tsv",
    "recall_at",
    "rerank_query",
    "rerank_vector_query",
    "save_index",
    "tier1_rerank",
    "tier1_weights",
    "tier2_weights",
    "tier3_weights",
    "tiered_rerank",
    "write_rankings_tsv",
]
