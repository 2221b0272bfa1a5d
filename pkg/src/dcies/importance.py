"""Relative-importance matrices from fitted probes.

Three routes, by probe class:

* linear heads: column-normalized absolute coefficients;
* random forests: Gini importance (impurity decrease summed over trees);
* black-box probes (MLP, RFF): SAGE-style Shapley sampling, which walks
  random feature permutations and credits each feature with the expected
  loss reduction when it joins the preceding coalition.  Masked features
  are imputed by marginal sampling from the train split.

Every route ends in :func:`dcies.core.validate_importance`, so callers
always receive a matrix satisfying the nonnegative / unit-column-sum
contract.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TEST, TRAIN, CodedDataset, ImportanceMatrix, validate_importance
from .probes import FittedProbe, ForestProbe, target_for

logger = logging.getLogger(__name__)

CLAMP_LOG_FRACTION = 0.05


class ZeroColumn(Exception):
    """A coefficient column has no mass to normalize."""

    def __init__(self, j: int):
        self.j = j
        super().__init__(f"coefficient column {j} sums to zero")


class DegenerateForest(UserWarning):
    """No tree in a forest made any split; the column falls back to uniform."""


class NotConverged(UserWarning):
    """SAGE sampling hit its evaluation budget before stabilizing."""


class MaskingUnsupported(Exception):
    """The probe cannot be evaluated under marginal imputation."""


@dataclass(frozen=True)
class SageConfig:
    """Sampling budget and stopping rule for SAGE estimates.

    ``marginal_sample_size`` counts imputation draws per masked value;
    the default single draw matches common permutation-sampling practice,
    larger values reduce imputation variance at proportional cost.
    """

    n_permutations: int = 32
    marginal_sample_size: int = 1
    convergence_tol: float = 1e-3
    max_evals: int = 5_000_000
    seed: int = 0
    eval_batch: int = 1024
    window: int = 5

    def __post_init__(self):
        if self.n_permutations < 10:
            raise ValueError("n_permutations must be at least 10")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.marginal_sample_size < 1 or self.max_evals < 1:
            raise ValueError("sampling sizes must be positive")


def coefficient_importance(weights: np.ndarray, probe_tag: str = "coefficients") -> ImportanceMatrix:
    """Column-normalized absolute values of a linear weight matrix (L x K)."""
    w = np.abs(np.asarray(weights, dtype=float))
    sums = w.sum(axis=0)
    for j in np.flatnonzero(sums == 0):
        raise ZeroColumn(int(j))
    return validate_importance(w / sums, probe_tag=probe_tag)


def gini_importance(forest_probes: list[ForestProbe], probe_tag: str = "rf-gini") -> ImportanceMatrix:
    """One column per factor from impurity-decrease sums, normalized.

    A feature never split on contributes exactly zero.  A forest that made
    no splits at all yields a uniform column plus a warning.
    """
    columns = []
    degenerate = []
    for probe in forest_probes:
        sums = probe.gini_sums()
        total = sums.sum()
        if total <= 0:
            warnings.warn(
                f"factor {probe.factor}: forest made no splits, using uniform importances",
                DegenerateForest,
            )
            degenerate.append(probe.factor)
            columns.append(np.full(probe.n_inputs, 1.0 / probe.n_inputs))
        else:
            columns.append(sums / total)
    matrix = validate_importance(np.column_stack(columns), probe_tag=probe_tag)
    if degenerate:
        matrix.diagnostics["degenerate_factors"] = degenerate
    return matrix


def _averaged_prediction(probe: FittedProbe, work: np.ndarray) -> np.ndarray:
    """Prediction averaged over the imputation replicas (first axis)."""
    s, b, l = work.shape
    flat = probe.predict(work.reshape(s * b, l))
    if flat.ndim == 1:
        return flat.reshape(s, b).mean(axis=0)
    return flat.reshape(s, b, -1).mean(axis=0)


def _loss(pred: np.ndarray, target: np.ndarray, task_kind: str) -> float:
    if task_kind == "regression":
        return float(np.mean((pred - target) ** 2))
    p = np.clip(pred, 1e-12, 1.0)
    return float(-np.mean(np.log(p[np.arange(len(target)), target.astype(int)])))


def sage_importance(
    probe: FittedProbe,
    dataset: CodedDataset,
    factor: int,
    cfg: SageConfig,
) -> tuple[np.ndarray, dict]:
    """SAGE values for one factor, clamped and column-normalized.

    Permutations are walked incrementally with shared imputation draws, so
    consecutive loss differences cancel all masking noise except the
    newly-unmasked feature's own.  Stops early once the running mean moves
    less than ``convergence_tol`` over ``window`` consecutive permutations.
    """
    if not hasattr(probe, "predict"):
        raise MaskingUnsupported(f"probe {probe!r} has no predict method")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(factor, 101)))
    l = dataset.n_codes
    x_eval = dataset.codes_for(TEST)
    y_eval, task_kind, _ = target_for(dataset, factor, TEST)
    if x_eval.shape[0] > cfg.eval_batch:
        pick = rng.choice(x_eval.shape[0], cfg.eval_batch, replace=False)
        x_eval, y_eval = x_eval[pick], y_eval[pick]
    pool = dataset.codes_for(TRAIN)
    b, s = x_eval.shape[0], cfg.marginal_sample_size
    rows_per_perm = (l + 1) * b * s

    totals = np.zeros(l)
    prev_mean = None
    stable = 0
    converged = False
    perms_run = 0
    evals = 0

    for _ in range(cfg.n_permutations):
        if evals + rows_per_perm > cfg.max_evals and perms_run > 0:
            break
        # fresh marginal draws for every replica and feature
        work = np.empty((s, b, l))
        for f in range(l):
            draws = pool[rng.integers(0, pool.shape[0], size=(s, b)), f]
            work[:, :, f] = draws
        loss_prev = _loss(_averaged_prediction(probe, work), y_eval, task_kind)
        for f in rng.permutation(l):
            work[:, :, f] = x_eval[:, f]
            loss_new = _loss(_averaged_prediction(probe, work), y_eval, task_kind)
            totals[f] += loss_prev - loss_new
            loss_prev = loss_new
        evals += rows_per_perm
        perms_run += 1
        mean = totals / perms_run
        if prev_mean is not None and np.max(np.abs(mean - prev_mean)) < cfg.convergence_tol:
            stable += 1
            if stable >= cfg.window and perms_run >= 10:
                converged = True
                break
        else:
            stable = 0
        prev_mean = mean

    raw = totals / perms_run  # the first permutation always runs
    if perms_run < cfg.n_permutations and not converged:
        warnings.warn(
            f"factor {factor}: SAGE stopped after {perms_run} permutations "
            f"(evaluation budget), running mean not yet stable",
            NotConverged,
        )

    abs_mass = np.abs(raw).sum()
    clamped = float(np.clip(-raw, 0.0, None).sum() / abs_mass) if abs_mass > 0 else 0.0
    if clamped > CLAMP_LOG_FRACTION:
        logger.warning(
            "factor %d: clamping removed %.1f%% of SAGE mass; the zero-importance "
            "necessity condition may be violated", factor, 100 * clamped,
        )
    column = np.clip(raw, 0.0, None)
    zero_mass = column.sum() <= 0
    if zero_mass:
        column = np.full(l, 1.0 / l)
    else:
        column = column / column.sum()
    diagnostics = {
        "n_permutations_run": perms_run,
        "converged": converged,
        "evals_used": evals,
        "sum_raw": float(raw.sum()),
        "clamped_mass_fraction": clamped,
        "zero_mass": bool(zero_mass),
    }
    return column, diagnostics


def importance_for(
    probe_class: str,
    probes: list[FittedProbe],
    dataset: CodedDataset,
    cfg: SageConfig | None = None,
    use_coefficients: bool = False,
) -> ImportanceMatrix:
    """Dispatch to the right importance route for a set of best probes.

    ``probes`` holds one fitted probe per factor.  Forests use Gini; MLPs
    and RFF heads use SAGE.  With ``use_coefficients``, all-linear MLP
    probes take the coefficient route instead (linear-identifiability
    diagnostics); categorical probes aggregate class weights by L2 norm.
    """
    if probe_class == "rf":
        return gini_importance(probes)
    if use_coefficients and probe_class == "mlp":
        cols = []
        for probe in probes:
            w = probe.linear_weights
            if w is None:
                raise ValueError(f"factor {probe.factor}: probe is not linear, cannot use coefficients")
            cols.append(w[:, 0] if w.shape[1] == 1 else np.linalg.norm(w, axis=1))
        return coefficient_importance(np.column_stack(cols), probe_tag=f"{probe_class}-coefficients")
    cfg = cfg or SageConfig()
    columns, diags = [], {}
    for probe in probes:
        col, d = sage_importance(probe, dataset, probe.factor, cfg)
        columns.append(col)
        diags[str(probe.factor)] = d
    matrix = validate_importance(np.column_stack(columns), probe_tag=f"{probe_class}-sage")
    matrix.diagnostics["sage"] = diags
    return matrix


def save_importance(matrix: ImportanceMatrix, csv_path: str | Path, meta: dict | None = None) -> None:
    """CSV matrix (L rows x K columns) with a JSON sidecar of provenance."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix.values:
            writer.writerow([format(v, ".17g") for v in row])
    sidecar = {"probe_tag": matrix.probe_tag, "diagnostics": matrix.diagnostics}
    sidecar.update(meta or {})
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def load_importance(csv_path: str | Path) -> ImportanceMatrix:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        values = np.asarray([[float(v) for v in row] for row in csv.reader(fh) if row])
    tag = "unspecified"
    sidecar = csv_path.with_suffix(".json")
    if sidecar.exists():
        with open(sidecar) as fh:
            tag = json.load(fh).get("probe_tag", tag)
    return validate_importance(values, probe_tag=tag)
