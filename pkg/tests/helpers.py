"""Independent oracles shared by the unit and acceptance suites.

These deliberately avoid the library's permutation-walk estimator: they
enumerate coalitions exhaustively and evaluate the value function in
closed form, so they can vouch for the sampled estimates.
"""

from itertools import combinations
from math import factorial

import numpy as np

from dcies.core import CodedDataset, FactorSpec, assign_splits, normalize_dataset
from dcies.probes.mlp import MlpProbe


def linear_probe(dataset: CodedDataset, factor: int = 0) -> MlpProbe:
    """Least-squares linear probe for one continuous factor (fixed, exact)."""
    train = dataset.mask("train")
    x = np.column_stack([dataset.codes[train], np.ones(train.sum())])
    w, *_ = np.linalg.lstsq(x, dataset.factors[train, factor], rcond=None)
    return MlpProbe(
        probe_class="mlp", factor=factor, capacity_index=0, capacity_value=0.0,
        task_kind="regression", n_inputs=dataset.n_codes,
        params=(w[:-1, None], w[-1:]), width=0,
    )


def gaussian_code_dataset(n: int, l: int, weights: np.ndarray, seed: int) -> CodedDataset:
    """Independent standardized codes with one linear continuous factor."""
    rng = np.random.default_rng(seed)
    codes = rng.normal(size=(n, l))
    factor = codes @ np.asarray(weights, dtype=float)
    ds = CodedDataset(
        codes=codes,
        factors=factor[:, None],
        factor_specs=(FactorSpec("z", "continuous"),),
        split=assign_splits(n, seed),
    )
    return normalize_dataset(ds)


def exhaustive_shapley_linear(
    probe: MlpProbe,
    dataset: CodedDataset,
    factor: int,
    marginal_sample_size: int,
) -> np.ndarray:
    """Exact Shapley values of a linear regression probe by coalition
    enumeration.

    The value function matches the sampler's convention: masked
    coordinates are imputed from the train-split marginal and predictions
    are averaged over ``marginal_sample_size`` draws, which for a linear
    probe under squared error contributes ``w_i^2 Var(c_i) / m`` per
    masked coordinate on top of the infinite-imputation loss.
    """
    w = probe.params[0][:, 0]
    b = probe.params[1][0]
    x = dataset.codes_for("test")
    y = dataset.factor_column(factor, "test")
    pool = dataset.codes_for("train")
    mu, var = pool.mean(axis=0), pool.var(axis=0)
    l = dataset.n_codes

    def value(subset: tuple[int, ...]) -> float:
        mask = np.zeros(l)
        mask[list(subset)] = 1.0
        pred = (x * mask) @ w + (mu * (1 - mask)) @ w + b
        base = np.mean((y - pred) ** 2)
        imputation = np.sum((1 - mask) * w**2 * var) / marginal_sample_size
        return -(base + imputation)

    phi = np.zeros(l)
    for i in range(l):
        others = [k for k in range(l) if k != i]
        for r in range(l):
            for subset in combinations(others, r):
                weight = factorial(r) * factorial(l - r - 1) / factorial(l)
                phi[i] += weight * (value(tuple(subset) + (i,)) - value(subset))
    return phi


def normalize_clamped(phi: np.ndarray) -> np.ndarray:
    clamped = np.clip(phi, 0.0, None)
    total = clamped.sum()
    if total <= 0:
        return np.full(phi.shape, 1.0 / len(phi))
    return clamped / total
