"""Distributed multiclass SVM.

Train one-vs-one SVMs at simulated sites, elect a global model through a
cross-site accuracy matrix, broadcast it, and benchmark the result against
centralized training and ensemble voting.
"""

from .baselines import VotingEnsemble, evaluate_ensemble, train_centralized
from .data import (
    Dataset,
    DatasetError,
    DatasetSchema,
    PartitionSpec,
    load_csv,
    partition_horizontal,
    train_test_split,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    render_report,
    run_experiment,
    run_fixture_election,
)
from .multiclass import OneVsOneSVC, accuracy_percent
from .protocol import (
    AccuracyMatrix,
    BestChoice,
    BestTable,
    DsvmRun,
    ElectionResult,
    EvalPolicy,
    LocalModel,
    Site,
    SiteData,
    build_accuracy_matrix,
    elect_global_model,
    run_dsvm,
    select_best_per_site,
    train_local_models,
)
from .serialize import SerializationError, deserialize_model, serialize_model
from .svm import BinarySVC, ResourceLimitError, kernel_eval, kernel_matrix

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix",
    "BestChoice",
    "BestTable",
    "BinarySVC",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "DatasetSchema",
    "DsvmRun",
    "ElectionResult",
    "EvalPolicy",
    "ExperimentConfig",
    "ExperimentReport",
    "LocalModel",
    "OneVsOneSVC",
    "PartitionSpec",
    "ResourceLimitError",
    "SerializationError",
    "Site",
    "SiteData",
    "VotingEnsemble",
    "accuracy_percent",
    "build_accuracy_matrix",
    "deserialize_model",
    "elect_global_model",
    "evaluate_ensemble",
    "kernel_eval",
    "kernel_matrix",
    "load_csv",
    "partition_horizontal",
    "render_report",
    "run_dsvm",
    "run_experiment",
    "run_fixture_election",
    "select_best_per_site",
    "serialize_model",
    "train_centralized",
    "train_local_models",
    "train_test_split",
    "__version__",
]
