"""Toolkit for mining instrumental-variable patterns from weighted causal
knowledge graphs and validating the selected causal chains on panel data."""

from .graph import (
    DIRECTED,
    UNDIRECTED,
    CausalGraph,
    GraphIntegrityError,
    GraphParseError,
    ReachabilitySpec,
    UnknownNodeError,
    bottleneck_weight,
    degree,
    is_edge_node,
    khop_reachable,
    load_graph,
)
from .mining import (
    A_REMOVED,
    LITERAL,
    IvTriple,
    MiningStats,
    OverlapReport,
    QualityPartition,
    compare_subgraphs,
    enumerate_iv_triples,
    quality_partition,
    score_triple,
    summarize,
)
from .features import (
    ConceptList,
    FeatureMatrix,
    build_concept_list_from_graph,
    build_concept_list_from_similarity,
    build_feature_matrix,
    preprocess_document,
    split_train_validation,
    term_frequency,
)
from .forest import ForestModel, ForestParams, Metrics, evaluate, predict, train_forest
from .regression import (
    RegressionSpec,
    TslsResult,
    anderson_lm,
    build_design,
    chi_square_sf,
    cragg_donald_f,
    fit_2sls,
    fit_ols,
    tsls_from_panel,
)
from .synth import (
    ScmParams,
    brute_force_iv_oracle,
    gen_classification_corpus,
    gen_random_graph,
    gen_scm_panel,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # graph
    "DIRECTED", "UNDIRECTED", "CausalGraph", "ReachabilitySpec",
    "GraphParseError", "GraphIntegrityError", "UnknownNodeError",
    "load_graph", "khop_reachable", "degree", "is_edge_node", "bottleneck_weight",
    # mining
    "A_REMOVED", "LITERAL", "IvTriple", "MiningStats", "QualityPartition", "OverlapReport",
    "enumerate_iv_triples", "score_triple", "summarize", "quality_partition", "compare_subgraphs",
    # features
    "ConceptList", "FeatureMatrix", "build_concept_list_from_similarity",
    "build_concept_list_from_graph", "preprocess_document", "term_frequency",
    "build_feature_matrix", "split_train_validation",
    # forest
    "ForestParams", "ForestModel", "Metrics", "train_forest", "predict", "evaluate",
    # regression
    "RegressionSpec", "TslsResult", "build_design", "fit_ols", "fit_2sls",
    "tsls_from_panel", "anderson_lm", "cragg_donald_f", "chi_square_sf",
    # synth
    "ScmParams", "gen_random_graph", "brute_force_iv_oracle",
    "gen_classification_corpus", "gen_scm_panel",
]
