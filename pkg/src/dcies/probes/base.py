"""Shared probe machinery: losses, baselines, evaluation.

A probe is a supervised predictor for one factor at one capacity.  Fitted
probes are immutable; prediction is deterministic given the same inputs.
Regression probes predict a standardized scalar and are scored with mean
square error; classification probes predict class probabilities and are
scored with cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import TEST, TRAIN, CodedDataset

PROBE_CLASSES = ("mlp", "rff", "rf")

PROBA_CLIP = 1e-12


class ProbeError(Exception):
    pass


class TrainingDiverged(ProbeError):
    """The optimizer produced a non-finite loss."""


class EmptySplit(ProbeError):
    pass


class SchemaMismatch(ProbeError):
    """Probe and dataset disagree on input width or target schema."""


class ConfigError(ProbeError):
    pass


@dataclass(frozen=True)
class ProbeLoss:
    """Test loss of one probe, raw and normalized against the baseline.

    The normalized loss is ``min(raw / baseline, 1)`` so informativeness
    and explicitness stay bounded even for pathological probes.
    """

    factor: int
    capacity_index: int
    raw: float
    normalized: float


@dataclass(frozen=True)
class FittedProbe:
    """Base for trained predictors; subclasses add parameters + predict."""

    probe_class: str
    factor: int
    capacity_index: int
    capacity_value: float
    task_kind: str  # "regression" | "classification"
    n_inputs: int
    n_classes: int | None = None
    seed: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def predict(self, codes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_schema(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=float)
        if codes.ndim != 2 or codes.shape[1] != self.n_inputs:
            raise SchemaMismatch(
                f"probe expects {self.n_inputs} code units, got shape {codes.shape}"
            )
        return codes


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((np.asarray(pred, dtype=float) - target) ** 2))


def cross_entropy(proba: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under ``proba``."""
    p = np.clip(np.asarray(proba, dtype=float), PROBA_CLIP, 1.0)
    idx = np.asarray(labels, dtype=int)
    return float(-np.mean(np.log(p[np.arange(len(idx)), idx])))


def prediction_loss(probe: FittedProbe, codes: np.ndarray, target: np.ndarray) -> float:
    pred = probe.predict(codes)
    if probe.task_kind == "regression":
        return mse(pred, target)
    return cross_entropy(pred, target)


def baseline_loss(dataset: CodedDataset, factor: int) -> float:
    """Loss of the capacity-free reference predictor.

    Continuous: predict the train-split mean, scored on the test split
    (about 1 for standardized targets).  Categorical: cross-entropy of the
    uniform distribution, exactly ``ln(cardinality)``.
    """
    spec = dataset.factor_specs[factor]
    if spec.is_categorical:
        return float(np.log(spec.cardinality))
    train = dataset.factor_column(factor, TRAIN)
    test = dataset.factor_column(factor, TEST)
    if train.size == 0 or test.size == 0:
        raise EmptySplit(f"factor {factor}: empty train or test split")
    return float(np.mean((test - train.mean()) ** 2))


def normalize_loss(raw: float, baseline: float) -> float:
    # raw cross-entropy can land a float ulp below zero on pure leaves
    return min(max(raw, 0.0) / baseline, 1.0)


def evaluate_probe(probe: FittedProbe, dataset: CodedDataset, split: str = TEST) -> ProbeLoss:
    """Loss of a fitted probe on the requested split of its dataset."""
    codes = probe._check_schema(dataset.codes_for(split))
    spec = dataset.factor_specs[probe.factor]
    if probe.task_kind == "classification":
        if not spec.is_categorical or probe.n_classes != spec.cardinality:
            raise SchemaMismatch(f"factor {probe.factor} is not categorical({probe.n_classes})")
    elif spec.is_categorical:
        raise SchemaMismatch(f"factor {probe.factor} is categorical, probe is a regressor")
    target = dataset.factor_column(probe.factor, split)
    if target.size == 0:
        raise EmptySplit(f"split {split!r} is empty")
    raw = prediction_loss(probe, codes, target)
    return ProbeLoss(
        factor=probe.factor,
        capacity_index=probe.capacity_index,
        raw=raw,
        normalized=normalize_loss(raw, baseline_loss(dataset, probe.factor)),
    )


def target_for(dataset: CodedDataset, factor: int, split: str) -> tuple[np.ndarray, str, int | None]:
    """Target vector, task kind and class count for one factor/split."""
    spec = dataset.factor_specs[factor]
    values = dataset.factor_column(factor, split)
    if spec.is_categorical:
        return values.astype(int), "classification", spec.cardinality
    return values, "regression", None
