"""Rank flow embedding: unsupervised rank-based manifold learning.

Refines retrieval ranked lists through a flow of rank-based structures
(reciprocal sigmoid normalization, hypergraph embeddings, Cartesian
products, connected components) and produces context-sensitive embeddings
for downstream semi-supervised classifiers.
"""

from .errors import (
    RankflowError, ConfigurationError, InputDataError, StageError,
)
from .ranking import (
    SparseScores, RankedList, RankedLists, NeighborhoodSet,
    build_ranked_lists, stable_resort, neighborhood, truncate, default_depth,
)
from .normalization import SigmoidParams, sigmoid_weight, normalize, fuse_rankers
from .hypergraph import (
    Hyperedge, HypergraphState, position_weight, build_incidence,
    filter_incidence, hyperedge_weights, build_hypergraph, affinity,
    hypergraph_rerank,
)
from .cartesian import pair_association, cartesian_scores, cartesian_rerank
from .components import (
    Graph, ComponentSet, UnionFind, candidate_edges, edge_confidence,
    edge_confidences, edge_threshold, build_graph, connected_components,
    cc_embeddings, object_embeddings, cc_rerank, classification_embeddings,
)
from .pipeline import (
    RfeConfig, RfeIndex, run_rfe, run_aggregation, query_unseen,
    extend_with_tail,
)
from .metrics import (
    RelevanceOracle, average_precision, mean_average_precision,
    precision_at, recall_at, ns_score, cmc_r1,
)
from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
