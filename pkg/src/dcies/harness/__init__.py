"""Experiment orchestration: config, runner, reports, CLI."""

from .config import DownstreamConfig, ExperimentConfig, RepresentationSource, load_config
from .report import IoError, emit_report, scores_payload, write_curves_csv
from .runner import (
    AllRunsFailed,
    CorrelationReport,
    ExperimentResult,
    FailedRun,
    InsufficientData,
    RunResult,
    correlate,
    correlation_p_value,
    downstream_performance,
    pearson,
    run_experiment,
    run_single,
    spearman,
)
from .stages import run_pipeline, stage_generate, stage_train_probes

__all__ = [
    "AllRunsFailed",
    "CorrelationReport",
    "DownstreamConfig",
    "ExperimentConfig",
    "ExperimentResult",
    "FailedRun",
    "InsufficientData",
    "IoError",
    "RepresentationSource",
    "RunResult",
    "correlate",
    "correlation_p_value",
    "downstream_performance",
    "emit_report",
    "load_config",
    "pearson",
    "run_experiment",
    "run_pipeline",
    "run_single",
    "scores_payload",
    "spearman",
    "stage_generate",
    "stage_train_probes",
    "write_curves_csv",
]
