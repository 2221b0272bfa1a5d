"""Probe function classes with explicit capacity ladders."""

from .base import (
    PROBE_CLASSES,
    ConfigError,
    EmptySplit,
    FittedProbe,
    ProbeError,
    ProbeLoss,
    SchemaMismatch,
    TrainingDiverged,
    baseline_loss,
    cross_entropy,
    evaluate_probe,
    mse,
    normalize_loss,
    prediction_loss,
    target_for,
)
from .checkpoints import CheckpointError, load_probe, save_probe
from .forest import ForestProbe, fit_forest
from .ladder import CapacityLadder, LadderEntry, build_ladder, mlp_excess_params, rescale
from .mlp import MlpProbe, fit_mlp
from .rff import RffProbe, fit_rff, median_bandwidth
from .training import (
    LadderResult,
    TrainingConfig,
    derive_seed,
    fit_probe,
    seed_int,
    train_ladder,
)

__all__ = [
    "PROBE_CLASSES",
    "CapacityLadder",
    "CheckpointError",
    "ConfigError",
    "EmptySplit",
    "FittedProbe",
    "ForestProbe",
    "LadderEntry",
    "LadderResult",
    "MlpProbe",
    "ProbeError",
    "ProbeLoss",
    "RffProbe",
    "SchemaMismatch",
    "TrainingConfig",
    "TrainingDiverged",
    "baseline_loss",
    "build_ladder",
    "cross_entropy",
    "derive_seed",
    "evaluate_probe",
    "fit_forest",
    "fit_mlp",
    "fit_probe",
    "fit_rff",
    "load_probe",
    "median_bandwidth",
    "mlp_excess_params",
    "mse",
    "normalize_loss",
    "prediction_loss",
    "rescale",
    "save_probe",
    "seed_int",
    "target_for",
    "train_ladder",
]
