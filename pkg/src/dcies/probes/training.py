"""Fitting probes over a capacity ladder.

Every (factor, capacity) pair gets its own RNG stream derived from the
experiment seed, so fits are reproducible independently of execution
order and safe to run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import TRAIN, VALIDATION, CodedDataset
from .base import (
    EmptySplit,
    FittedProbe,
    ProbeError,
    ProbeLoss,
    baseline_loss,
    evaluate_probe,
    target_for,
)
from .forest import fit_forest
from .ladder import CapacityLadder, LadderEntry
from .mlp import fit_mlp
from .rff import fit_rff


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs shared across ladder fits; defaults follow the probe contract."""

    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    rf_n_trees: int = 100
    rf_max_features: object = None  # None = class-dependent default


def derive_seed(experiment_seed: int, factor: int, capacity_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(experiment_seed, spawn_key=(factor, capacity_index))


def seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def fit_probe(
    dataset: CodedDataset,
    factor: int,
    probe_class: str,
    entry: LadderEntry,
    seed: int,
    config: TrainingConfig | None = None,
    capacity_value: float | None = None,
) -> FittedProbe:
    """Train one probe for one factor at one ladder rung."""
    config = config or TrainingConfig()
    if not np.any(dataset.mask(TRAIN)):
        raise EmptySplit("train split is empty")
    x_train = dataset.codes_for(TRAIN)
    x_val = dataset.codes_for(VALIDATION)
    y_train, task_kind, n_classes = target_for(dataset, factor, TRAIN)
    y_val, _, _ = target_for(dataset, factor, VALIDATION)
    if x_val.shape[0] == 0:
        raise EmptySplit("validation split is empty")
    seq = derive_seed(seed, factor, entry.index)
    cap = entry.capacity if capacity_value is None else capacity_value
    common = dict(
        task_kind=task_kind,
        n_classes=n_classes,
        factor=factor,
        capacity_index=entry.index,
        capacity_value=cap,
        seed=seed,
    )
    if probe_class == "mlp":
        return fit_mlp(
            x_train, y_train, x_val, y_val,
            width=entry.params["width"],
            rng=np.random.default_rng(seq),
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            **common,
        )
    if probe_class == "rff":
        return fit_rff(
            x_train, y_train, x_val, y_val,
            n_features=entry.params["n_features"],
            rng=np.random.default_rng(seq),
            **common,
        )
    if probe_class == "rf":
        return fit_forest(
            x_train, y_train,
            max_depth=entry.params["max_depth"],
            model_seed=seed_int(seq),
            n_trees=config.rf_n_trees,
            max_features=config.rf_max_features,
            **common,
        )
    raise ProbeError(f"unknown probe class {probe_class!r}")


@dataclass(frozen=True)
class LadderResult:
    """All fits of one ladder: losses, probes and per-factor best rungs."""

    ladder: CapacityLadder
    losses: tuple[tuple[ProbeLoss, ...], ...]  # [factor][capacity]
    probes: tuple[tuple[FittedProbe, ...], ...]
    baselines: tuple[float, ...]
    best_index: tuple[int, ...]
    best_loss: tuple[float, ...]
    factors: tuple[int, ...]

    def normalized_losses(self, factor_pos: int) -> np.ndarray:
        return np.asarray([pl.normalized for pl in self.losses[factor_pos]])

    def best_probe(self, factor_pos: int) -> FittedProbe:
        return self.probes[factor_pos][self.best_index[factor_pos]]


def train_ladder(
    dataset: CodedDataset,
    ladder: CapacityLadder,
    seed: int,
    factors: list[int] | None = None,
    config: TrainingConfig | None = None,
) -> LadderResult:
    """Fit one probe per (factor, rung) and find each factor's best rung.

    Ties for the lowest normalized loss resolve to the smallest capacity.
    Fit failures propagate with the (factor, capacity) context attached.
    """
    factors = list(range(dataset.n_factors)) if factors is None else list(factors)
    all_losses, all_probes, baselines = [], [], []
    best_idx, best_loss = [], []
    for j in factors:
        row_losses, row_probes = [], []
        for entry in ladder.entries:
            try:
                probe = fit_probe(dataset, j, ladder.probe_class, entry, seed, config)
                row_probes.append(probe)
                row_losses.append(evaluate_probe(probe, dataset))
            except ProbeError as err:
                raise type(err)(
                    f"factor {j}, capacity index {entry.index} ({entry.params}): {err}"
                ) from err
        normalized = np.asarray([pl.normalized for pl in row_losses])
        t_star = int(np.argmin(normalized))
        all_losses.append(tuple(row_losses))
        all_probes.append(tuple(row_probes))
        baselines.append(baseline_loss(dataset, j))
        best_idx.append(t_star)
        best_loss.append(float(normalized[t_star]))
    return LadderResult(
        ladder=ladder,
        losses=tuple(all_losses),
        probes=tuple(all_probes),
        baselines=tuple(baselines),
        best_index=tuple(best_idx),
        best_loss=tuple(best_loss),
        factors=tuple(factors),
    )
