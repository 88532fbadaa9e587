"""Multimodal word representations from gated fusion of linguistic and
(predicted) visual embeddings."""

__version__ = "0.1.0"

from .embeddings import (
    EmbeddingTable,
    ImageFeatureSet,
    aggregate_image_features,
    image_dispersion,
    l2_normalize,
    load_embeddings,
    save_embeddings,
)
from .errors import GatefuseError, LoadError
from .gates import (
    GateModel,
    baseline_conc,
    baseline_dispersion,
    baseline_ridge,
    build_fused_table,
    compute_gates,
    fuse,
    initialize_gate_model,
)
from .mapping import MappingModel, fit_ridge, predict_table, predict_visual, select_lambda
from .benchmark import SimilarityBenchmark, BenchmarkResult, evaluate, run_suite, spearman
from .synthetic import SyntheticSpec, generate
from .training import (
    AssociationPairSet,
    TrainConfig,
    dev_score,
    gradients,
    load_pairs,
    pair_loss,
    sample_negatives,
    train,
)

__all__ = [
    "AssociationPairSet",
    "BenchmarkResult",
    "EmbeddingTable",
    "GateModel",
    "GatefuseError",
    "ImageFeatureSet",
    "LoadError",
    "MappingModel",
    "SimilarityBenchmark",
    "SyntheticSpec",
    "TrainConfig",
    "aggregate_image_features",
    "baseline_conc",
    "baseline_dispersion",
    "baseline_ridge",
    "build_fused_table",
    "compute_gates",
    "dev_score",
    "evaluate",
    "fit_ridge",
    "fuse",
    "generate",
    "gradients",
    "image_dispersion",
    "initialize_gate_model",
    "l2_normalize",
    "load_embeddings",
    "load_pairs",
    "pair_loss",
    "predict_table",
    "predict_visual",
    "run_suite",
    "sample_negatives",
    "save_embeddings",
    "select_lambda",
    "spearman",
    "train",
]
