"""Synthetic factor grids, representation baselines and downstream tasks.

The desk-scale substrate: ground-truth factors are sampled on grids, then
pushed through a mixing to produce the codes under evaluation.  Available
mixings range from the identity (codes are the labels) to a fixed random
nonlinear network standing in for raw high-dimensional data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TRAIN, CodedDataset, FactorSpec

MIXING_KINDS = (
    "identity",
    "noisy",
    "linear_uniform",
    "signed_permutation",
    "elementwise_monotone",
    "random_mlp",
)

ANALYTIC_KINDS = MIXING_KINDS[:-1]

CONDITION_LIMIT = 1e8


class SingularMixing(Exception):
    """The sampled square mixing matrix is numerically singular."""


class NotAnalytic(Exception):
    """No closed-form score fragment exists for this mixing kind."""


@dataclass(frozen=True)
class MixingSpec:
    """How codes are derived from factors.

    ``noise_std`` is only meaningful for the ``noisy`` kind.  ``out_dim``
    defaults to the number of factors (square mixing).  ``depth`` and
    ``width`` configure the untrained network of ``random_mlp``.
    """

    kind: str
    noise_std: float = 0.0
    seed: int = 0
    out_dim: int | None = None
    depth: int = 2
    width: int = 16
    permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in MIXING_KINDS:
            raise ValueError(f"unknown mixing kind {self.kind!r}")
        if self.kind != "noisy" and self.noise_std != 0.0:
            raise ValueError("noise_std must be 0 unless kind is 'noisy'")
        if self.kind == "noisy" and self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class RealizedMixing:
    """Concrete sampled parameters of a mixing, for tests and verdicts.

    For ``elementwise_monotone``: code i equals ``h_i(z[pi[i]])`` with
    ``h_i(x) = x**3 + slope_i * x`` (strictly increasing for positive
    slopes).  ``pi`` is also populated for ``signed_permutation``.
    """

    kind: str
    weight: np.ndarray | None = None
    signs: np.ndarray | None = None
    pi: np.ndarray | None = None
    slopes: np.ndarray | None = None
    layers: tuple = ()


def _rng(spec: MixingSpec, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=key))


def realize_mixing(spec: MixingSpec, n_factors: int) -> RealizedMixing:
    """Sample the mixing's parameters deterministically from its seed."""
    k = n_factors
    l = spec.out_dim or k
    if spec.kind in ("identity", "noisy"):
        return RealizedMixing(kind=spec.kind)
    if spec.kind == "linear_uniform":
        for attempt in range(2):
            rng = _rng(spec, 1, attempt)
            w = 1.0 / (l * k) + rng.normal(0.0, np.sqrt(0.001), size=(l, k))
            if l != k or np.linalg.cond(w) <= CONDITION_LIMIT:
                return RealizedMixing(kind=spec.kind, weight=w)
        raise SingularMixing(f"condition number above {CONDITION_LIMIT:g} after resampling")
    if spec.kind == "signed_permutation":
        rng = _rng(spec, 2)
        pi = rng.permutation(k) if spec.permutation is None else np.asarray(spec.permutation)
        signs = rng.choice([-1.0, 1.0], size=k)
        return RealizedMixing(kind=spec.kind, pi=pi, signs=signs)
    if spec.kind == "elementwise_monotone":
        rng = _rng(spec, 3)
        pi = rng.permutation(k) if spec.permutation is None else np.asarray(spec.permutation)
        slopes = rng.uniform(0.5, 1.5, size=k)
        return RealizedMixing(kind=spec.kind, pi=pi, slopes=slopes)
    # random_mlp: untrained tanh network, weights scaled into the
    # nonlinear regime so the map is genuinely hard for linear probes
    rng = _rng(spec, 4)
    dims = [k] + [spec.width] * spec.depth + [l]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, 1.6 / np.sqrt(fan_in), size=(fan_in, fan_out))
        b = rng.normal(0.0, 0.1, size=fan_out)
        layers.append((w, b))
    return RealizedMixing(kind=spec.kind, layers=tuple(layers))


def _categorical_embedding(values: np.ndarray, cardinality: int) -> np.ndarray:
    # theoretical mean/std of the uniform class-index distribution
    mean = (cardinality - 1) / 2.0
    std = np.sqrt((cardinality**2 - 1) / 12.0)
    return (values - mean) / std


def embed_factors(factors: np.ndarray, specs) -> np.ndarray:
    """Standardized real-valued view of the factor matrix.

    Continuous columns pass through; categorical class indices map to
    standardized values under their uniform sampling distribution.
    """
    z = np.array(factors, dtype=float)
    for j, spec in enumerate(specs):
        if spec.is_categorical:
            z[:, j] = _categorical_embedding(z[:, j], spec.cardinality)
    return z


def generate_factors(specs, n_samples: int, seed: int, grid_points: int = 64) -> np.ndarray:
    """Sample independent factors: categorical uniform, continuous on a grid.

    Continuous columns are standardized against the grid's theoretical
    moments, so they arrive with mean ~0 and variance ~1.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(17,)))
    cols = []
    for spec in specs:
        if spec.is_categorical:
            cols.append(rng.integers(0, spec.cardinality, size=n_samples).astype(float))
        else:
            idx = rng.integers(0, grid_points, size=n_samples).astype(float)
            cols.append(_categorical_embedding(idx, grid_points))
    return np.column_stack(cols)


def mix(factors: np.ndarray, specs, mixing: MixingSpec) -> np.ndarray:
    """Produce codes from factors according to the mixing spec."""
    z = embed_factors(factors, specs)
    n, k = z.shape
    real = realize_mixing(mixing, k)
    if mixing.kind == "identity":
        return z
    if mixing.kind == "noisy":
        rng = _rng(mixing, 0)
        return z + rng.normal(0.0, mixing.noise_std, size=z.shape)
    if mixing.kind == "linear_uniform":
        return z @ real.weight.T
    if mixing.kind == "signed_permutation":
        return z[:, real.pi] * real.signs
    if mixing.kind == "elementwise_monotone":
        src = z[:, real.pi]
        return src**3 + real.slopes * src
    out = z
    for w, b in real.layers[:-1]:
        out = np.tanh(out @ w + b)
    w, b = real.layers[-1]
    return out @ w + b


def make_dataset(
    specs,
    mixing: MixingSpec,
    n_samples: int,
    seed: int,
    split_fractions=(0.7, 0.1, 0.2),
    grid_points: int = 64,
) -> CodedDataset:
    """Factors + mixing + split assignment in one step (unnormalized)."""
    from .core import assign_splits

    factors = generate_factors(specs, n_samples, seed, grid_points=grid_points)
    codes = mix(factors, specs, mixing)
    split = assign_splits(n_samples, seed, split_fractions)
    return CodedDataset(codes=codes, factors=factors, factor_specs=tuple(specs), split=split)


@dataclass(frozen=True)
class DownstreamTask:
    """One synthetic downstream target derived from the factors."""

    task_id: str
    kind: str  # "regression" | "classification"
    weights: np.ndarray | None = None
    factor_index: int | None = None
    threshold: float | None = None


def make_downstream_tasks(
    factor_specs,
    dataset: CodedDataset,
    n_reg: int | None = None,
    n_cls: int | None = None,
    seed: int = 0,
) -> tuple[list[DownstreamTask], np.ndarray]:
    """Regression targets y = M z and median-threshold binary targets.

    Regression weights are uniform on [0, 1] over the standardized factor
    view; each classification task thresholds one factor at its train-split
    median.  Returns the tasks plus an (n_samples, n_tasks) label matrix.
    """
    k = dataset.n_factors
    n_reg = k if n_reg is None else n_reg
    n_cls = k if n_cls is None else n_cls
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(71,)))
    z = embed_factors(dataset.factors, factor_specs)
    train = dataset.mask(TRAIN)

    tasks: list[DownstreamTask] = []
    labels = []
    for i in range(n_reg):
        m = rng.uniform(0.0, 1.0, size=k)
        tasks.append(DownstreamTask(task_id=f"reg{i}", kind="regression", weights=m))
        labels.append(z @ m)
    for i in range(n_cls):
        j = i % k
        threshold = float(np.median(z[train, j]))
        tasks.append(DownstreamTask(task_id=f"cls{i}", kind="classification",
                                    factor_index=j, threshold=threshold))
        labels.append((z[:, j] > threshold).astype(float))
    return tasks, np.column_stack(labels)


def oracle_scores(mixing: MixingSpec, factor_specs=None) -> dict:
    """Closed-form score fragments for the analytic mixings.

    Used as acceptance targets.  The informativeness entry for the noisy
    mixing is the optimal-regression value ``1 - s^2 / (1 + s^2)`` and only
    applies to continuous factors; categorical entries are None.
    """
    if mixing.kind not in ANALYTIC_KINDS:
        raise NotAnalytic(f"no closed-form scores for kind {mixing.kind!r}")
    if mixing.kind in ("identity", "signed_permutation"):
        return {"D": 1.0, "C": 1.0, "I": 1.0, "E": 1.0}
    if mixing.kind == "noisy":
        var = mixing.noise_std**2
        i_cont = 1.0 - var / (1.0 + var)
        out = {"D": 1.0, "C": 1.0, "I": None, "E": 1.0, "I_continuous": i_cont}
        if factor_specs is not None:
            per = [None if s.is_categorical else i_cont for s in factor_specs]
            out["per_factor_I"] = per
            if all(v is not None for v in per):
                out["I"] = float(np.mean(per))
        return out
    if mixing.kind == "linear_uniform":
        return {"D": 0.0, "C": 0.0, "I": 1.0, "E": 1.0}
    # elementwise_monotone: mixing-pattern scores are exact, E depends on
    # the probe class and has no closed form
    return {"D": 1.0, "C": 1.0, "I": 1.0, "E": None}


def mpi3d_like_specs() -> tuple[FactorSpec, ...]:
    """Seven categorical factors with the cardinalities (6,6,2,3,3,40,40)."""
    cards = (6, 6, 2, 3, 3, 40, 40)
    names = ("color", "shape", "size", "height", "background", "azimuth", "elevation")
    return tuple(FactorSpec(name=n, kind="categorical", cardinality=c) for n, c in zip(names, cards))


def desk_specs() -> tuple[FactorSpec, ...]:
    """Default desk-scale factor set: four continuous, three categorical."""
    return (
        FactorSpec("f0", "continuous"),
        FactorSpec("f1", "continuous"),
        FactorSpec("f2", "continuous"),
        FactorSpec("f3", "continuous"),
        FactorSpec("f4", "categorical", 6),
        FactorSpec("f5", "categorical", 3),
        FactorSpec("f6", "categorical", 2),
    )
