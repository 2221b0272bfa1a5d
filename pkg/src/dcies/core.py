"""Domain types shared by the whole toolkit.

A representation under evaluation is a matrix of codes ``c`` (N rows, L
columns) paired with ground-truth generative factors ``z`` (N rows, K
columns).  Everything downstream consumes two contracts defined here:

* :class:`CodedDataset` -- codes + factors + per-factor type metadata +
  train/validation/test split, standardized with train-split statistics.
* :class:`ImportanceMatrix` -- a nonnegative L x K matrix with unit column
  sums attributing each factor's prediction to individual code units.

All types are frozen and hold read-only arrays, so they can be shared
across parallel workers without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TRAIN, VALIDATION, TEST = "train", "validation", "test"
SPLIT_NAMES = (TRAIN, VALIDATION, TEST)

#: entries more negative than this are rejected; tinier ones are clamped to 0
NEGATIVE_CLAMP = 1e-9
#: tolerance on unit column sums / zero train means
SUM_TOL = 1e-6
#: tolerance on unit train variance (sampling noise at desk scale)
VAR_TOL = 1e-3


class CoreError(Exception):
    """Base class for contract violations in this module."""


class ZeroVarianceColumn(CoreError):
    """A code column is constant on the train split.

    This signals a dead unit that must be surfaced to the caller rather
    than silently dropped or left unstandardized.
    """

    def __init__(self, index: int, which: str = "codes"):
        self.index = index
        self.which = which
        super().__init__(f"{which} column {index} has zero variance on the train split")


class InvalidImportance(CoreError):
    """A column of a candidate importance matrix does not sum to one."""

    def __init__(self, column: int, total: float):
        self.column = column
        self.total = total
        super().__init__(f"column {column} sums to {total!r}, expected 1 within {SUM_TOL}")


class NegativeImportance(CoreError):
    """A candidate importance entry is negative beyond clamping tolerance."""

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"entry ({i}, {j}) = {value!r} is negative beyond {NEGATIVE_CLAMP}")


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FactorSpec:
    """Type metadata for one generative factor."""

    name: str
    kind: str  # "continuous" | "categorical"
    cardinality: int | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "categorical":
            if self.cardinality is None or self.cardinality < 2:
                raise ValueError(f"categorical factor {self.name!r} needs cardinality >= 2")
        elif self.cardinality is not None:
            raise ValueError(f"continuous factor {self.name!r} must not set cardinality")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


@dataclass(frozen=True)
class NormalizationRecord:
    """Per-column affine standardization parameters (train-split statistics)."""

    code_mean: np.ndarray
    code_scale: np.ndarray
    factor_mean: np.ndarray
    factor_scale: np.ndarray

    def __post_init__(self):
        for name in ("code_mean", "code_scale", "factor_mean", "factor_scale"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=float)))


@dataclass(frozen=True)
class CodedDataset:
    """Paired codes and factors with split labels and normalization state.

    ``factors`` stores continuous values as floats and categorical values
    as integer class indices in ``[0, cardinality)``.  One-hot expansion is
    a probe concern and never happens here.
    """

    codes: np.ndarray
    factors: np.ndarray
    factor_specs: tuple[FactorSpec, ...]
    split: np.ndarray
    normalization: NormalizationRecord | None = None

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=float)
        factors = np.asarray(self.factors, dtype=float)
        split = np.asarray(self.split)
        if codes.ndim != 2 or factors.ndim != 2:
            raise ValueError("codes and factors must be 2-D matrices")
        n, l = codes.shape
        k = factors.shape[1]
        if n < 1 or l < 1 or k < 1:
            raise ValueError("need at least one sample, one code unit and one factor")
        if factors.shape[0] != n or split.shape != (n,):
            raise ValueError("codes, factors and split disagree on sample count")
        if len(self.factor_specs) != k:
            raise ValueError(f"got {len(self.factor_specs)} specs for {k} factors")
        if not np.all(np.isfinite(codes)):
            raise ValueError("codes contain non-finite values")
        unknown = set(np.unique(split)) - set(SPLIT_NAMES)
        if unknown:
            raise ValueError(f"unknown split labels: {sorted(unknown)}")
        for j, spec in enumerate(self.factor_specs):
            if spec.is_categorical:
                col = factors[:, j]
                if not np.all((col >= 0) & (col < spec.cardinality) & (col == np.round(col))):
                    raise ValueError(f"categorical factor {spec.name!r} has values outside [0, {spec.cardinality})")
        object.__setattr__(self, "codes", _frozen(codes))
        object.__setattr__(self, "factors", _frozen(factors))
        object.__setattr__(self, "factor_specs", tuple(self.factor_specs))
        object.__setattr__(self, "split", _frozen(split))

    @property
    def n_samples(self) -> int:
        return self.codes.shape[0]

    @property
    def n_codes(self) -> int:
        return self.codes.shape[1]

    @property
    def n_factors(self) -> int:
        return self.factors.shape[1]

    def mask(self, split: str) -> np.ndarray:
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}")
        return self.split == split

    def factor_column(self, j: int, split: str | None = None) -> np.ndarray:
        col = self.factors[:, j]
        if split is None:
            return col
        return col[self.mask(split)]

    def codes_for(self, split: str) -> np.ndarray:
        return self.codes[self.mask(split)]


@dataclass(frozen=True)
class ImportanceMatrix:
    """Relative importances R: nonnegative, unit column sums.

    Construct through :func:`validate_importance`; the constructor only
    re-checks the invariants it is handed.
    """

    values: np.ndarray
    probe_tag: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("importance matrix must be 2-D")
        if np.any(values < 0):
            i, j = np.argwhere(values < 0)[0]
            raise NegativeImportance(int(i), int(j), float(values[i, j]))
        sums = values.sum(axis=0)
        bad = np.abs(sums - 1.0) > SUM_TOL
        if np.any(bad):
            j = int(np.argmax(bad))
            raise InvalidImportance(j, float(sums[j]))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n_codes(self) -> int:
        return self.values.shape[0]

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizedRows:
    """Row distributions of an importance matrix plus row weights rho.

    Rows with zero mass keep a uniform placeholder distribution and weight
    zero, which renders them inert in every weighted average downstream.
    """

    values: np.ndarray
    row_weights: np.ndarray
    dead_rows: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "row_weights", _frozen(np.asarray(self.row_weights, dtype=float)))


def validate_importance(values: np.ndarray, probe_tag: str = "unspecified") -> ImportanceMatrix:
    """Clamp negligible negatives, renormalize near-unit columns, or fail.

    Entries in (-1e-9, 0) are clamped to zero.  Column sums within 1e-6 of
    one are renormalized exactly; anything further off raises
    :class:`InvalidImportance`.
    """
    values = np.array(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("importance matrix must be 2-D")
    if not np.all(np.isfinite(values)):
        raise ValueError("importance matrix has non-finite entries")
    neg = values < -NEGATIVE_CLAMP
    if np.any(neg):
        i, j = np.argwhere(neg)[0]
        raise NegativeImportance(int(i), int(j), float(values[i, j]))
    values[values < 0] = 0.0
    sums = values.sum(axis=0)
    off = np.abs(sums - 1.0) > SUM_TOL
    if np.any(off):
        j = int(np.argmax(off))
        raise InvalidImportance(j, float(sums[j]))
    values /= sums
    return ImportanceMatrix(values=values, probe_tag=probe_tag)


def row_distributions(matrix: ImportanceMatrix) -> NormalizedRows:
    """Normalize rows of R to distributions and compute row weights rho.

    ``P[i, j] = R[i, j] / sum_k R[i, k]`` for rows with positive mass and
    ``rho[i] = mean_k R[i, k]``.  The weights always sum to one because
    every column of R does.
    """
    r = matrix.values
    l, k = r.shape
    row_sums = r.sum(axis=1)
    rho = row_sums / k
    dead = row_sums <= 0.0
    safe = np.where(dead, 1.0, row_sums)
    p = r / safe[:, None]
    if np.any(dead):
        p[dead] = 1.0 / k
        rho = np.where(dead, 0.0, rho)
    return NormalizedRows(values=p, row_weights=rho, dead_rows=tuple(int(i) for i in np.flatnonzero(dead)))


def normalize_dataset(raw: CodedDataset) -> CodedDataset:
    """Standardize codes and continuous factors with train-split statistics.

    Categorical factor columns pass through untouched.  Idempotent within
    1e-6: re-normalizing a normalized dataset is a no-op up to float error.
    """
    train = raw.mask(TRAIN)
    if not np.any(train):
        raise ValueError("train split is empty")
    codes = np.array(raw.codes, dtype=float)
    factors = np.array(raw.factors, dtype=float)

    code_mean = codes[train].mean(axis=0)
    code_scale = codes[train].std(axis=0)
    for i in np.flatnonzero(code_scale <= 0):
        raise ZeroVarianceColumn(int(i), which="codes")
    codes = (codes - code_mean) / code_scale

    k = raw.n_factors
    factor_mean = np.zeros(k)
    factor_scale = np.ones(k)
    for j, spec in enumerate(raw.factor_specs):
        if spec.is_categorical:
            continue
        mu = factors[train, j].mean()
        sd = factors[train, j].std()
        if sd <= 0:
            raise ZeroVarianceColumn(j, which="factors")
        factor_mean[j], factor_scale[j] = mu, sd
        factors[:, j] = (factors[:, j] - mu) / sd

    record = NormalizationRecord(
        code_mean=code_mean, code_scale=code_scale,
        factor_mean=factor_mean, factor_scale=factor_scale,
    )
    return CodedDataset(
        codes=codes, factors=factors, factor_specs=raw.factor_specs,
        split=raw.split, normalization=record,
    )


def assign_splits(
    n: int,
    seed: int,
    fractions: Sequence[float] = (0.7, 0.1, 0.2),
) -> np.ndarray:
    """Seeded shuffle into train/validation/test by the given fractions."""
    if len(fractions) != 3 or not np.isclose(sum(fractions), 1.0):
        raise ValueError("fractions must be three numbers summing to 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(905,)))
    order = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    out = np.empty(n, dtype=object)
    out[order[:n_train]] = TRAIN
    out[order[n_train:n_train + n_val]] = VALIDATION
    out[order[n_train + n_val:]] = TEST
    return out.astype(str)
