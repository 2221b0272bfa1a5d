"""Evaluate learned representations against ground-truth factors.

Train ladders of increasing-capacity probes (linear/MLP, random Fourier
features, random forests), derive relative-importance matrices, and score
the representation on disentanglement (D), completeness (C),
informativeness (I), explicitness (E) and size (S), with identifiability
diagnostics and downstream-correlation analysis on top.
"""

from .core import (
    CodedDataset,
    FactorSpec,
    ImportanceMatrix,
    InvalidImportance,
    NegativeImportance,
    NormalizedRows,
    ZeroVarianceColumn,
    assign_splits,
    normalize_dataset,
    row_distributions,
    validate_importance,
)
from .importance import (
    SageConfig,
    coefficient_importance,
    gini_importance,
    importance_for,
    sage_importance,
)
from .metrics import (
    LossCapacityCurve,
    ScoreReport,
    aulcc,
    completeness,
    disentanglement,
    explicitness,
    identifiability_verdict,
    informativeness,
    score_report,
    size_score,
)
from .synthetic import (
    DownstreamTask,
    MixingSpec,
    generate_factors,
    make_dataset,
    make_downstream_tasks,
    mix,
    oracle_scores,
)

__version__ = "0.1.0"

__all__ = [
    "CodedDataset",
    "DownstreamTask",
    "FactorSpec",
    "ImportanceMatrix",
    "InvalidImportance",
    "LossCapacityCurve",
    "MixingSpec",
    "NegativeImportance",
    "NormalizedRows",
    "SageConfig",
    "ScoreReport",
    "ZeroVarianceColumn",
    "assign_splits",
    "aulcc",
    "coefficient_importance",
    "completeness",
    "disentanglement",
    "explicitness",
    "generate_factors",
    "gini_importance",
    "identifiability_verdict",
    "importance_for",
    "informativeness",
    "make_dataset",
    "make_downstream_tasks",
    "mix",
    "normalize_dataset",
    "oracle_scores",
    "row_distributions",
    "sage_importance",
    "score_report",
    "size_score",
    "validate_importance",
]
