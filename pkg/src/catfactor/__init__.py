"""Choose how to factor categorical data by its marginal likelihood, and
classify with the chosen factorization."""

__version__ = "0.1.0"

from .dataset import (
    Dataset,
    DatasetError,
    GroupCounts,
    VariableSchema,
    group_counts,
    load_csv,
    write_csv,
)
from .partitions import (
    CapExceeded,
    PartitionError,
    SetPartition,
    bell_number,
    canonicalize,
    enumerate_partitions,
    format_partition,
    parse_partition,
)
from .scoring import (
    BlockScorer,
    ScoredPartition,
    bayes_factor_two_binary,
    log_beta_one_plus,
    log_marginal_likelihood,
    log_posterior_score,
    two_binary_scores,
)
from .search import SearchConfig, exhaustive_search, greedy_search, rank_partitions, search
from .classifier import (
    FactoredClassifierModel,
    evaluate,
    load_model,
    predict,
    predict_proba,
    save_model,
    train,
)
from .synth import GeneratorSpec, generate

__all__ = [
    "Dataset",
    "DatasetError",
    "GroupCounts",
    "VariableSchema",
    "group_counts",
    "load_csv",
    "write_csv",
    "CapExceeded",
    "PartitionError",
    "SetPartition",
    "bell_number",
    "canonicalize",
    "enumerate_partitions",
    "format_partition",
    "parse_partition",
    "BlockScorer",
    "ScoredPartition",
    "bayes_factor_two_binary",
    "log_beta_one_plus",
    "log_marginal_likelihood",
    "log_posterior_score",
    "two_binary_scores",
    "FactoredClassifierModel",
    "evaluate",
    "load_model",
    "predict",
    "predict_proba",
    "save_model",
    "train",
    "SearchConfig",
    "exhaustive_search",
    "greedy_search",
    "rank_partitions",
    "search",
    "GeneratorSpec",
    "generate",
]
