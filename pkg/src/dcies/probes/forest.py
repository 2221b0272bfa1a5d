"""Random forest probes backed by scikit-learn's CART ensembles.

Capacity is the maximum tree depth.  Defaults follow common CART practice:
100 bootstrap trees, sqrt(L) candidate features per split for
classification and L/3 for regression.  Prediction is deterministic given
the fitting seed, and tree splits depend only on the ordering of feature
values, which makes predictions invariant to strictly monotone transforms
of any input column (for inputs on the same value grid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier, RandomForestRegressor

from .base import FittedProbe

DEFAULT_N_TREES = 100


@dataclass(frozen=True)
class ForestProbe(FittedProbe):
    model: object = None

    def predict(self, codes: np.ndarray) -> np.ndarray:
        codes = self._check_schema(codes)
        if self.task_kind == "regression":
            return self.model.predict(codes)
        proba = self.model.predict_proba(codes)
        classes = self.model.classes_.astype(int)
        if len(classes) == self.n_classes and np.array_equal(classes, np.arange(self.n_classes)):
            return proba
        full = np.zeros((codes.shape[0], self.n_classes))
        full[:, classes] = proba
        return full

    def gini_sums(self) -> np.ndarray:
        """Total impurity decrease per feature, summed over all trees.

        Gini impurity for classification, variance for regression.  A
        feature no tree ever split on gets exactly zero.
        """
        total = np.zeros(self.n_inputs)
        for tree in self.model.estimators_:
            total += tree.tree_.compute_feature_importances(normalize=False)
        return total

    def split_features(self) -> set[int]:
        used: set[int] = set()
        for tree in self.model.estimators_:
            feats = tree.tree_.feature
            used.update(int(f) for f in feats[feats >= 0])
        return used


def fit_forest(
    x_train: np.ndarray,
    y_train: np.ndarray,
    *,
    max_depth: int,
    task_kind: str,
    n_classes: int | None,
    seed: int,
    model_seed: int | None = None,
    n_trees: int = DEFAULT_N_TREES,
    max_features=None,
    factor: int = 0,
    capacity_index: int = 0,
    capacity_value: float = 0.0,
) -> ForestProbe:
    common = dict(
        n_estimators=n_trees,
        max_depth=max_depth,
        bootstrap=True,
        random_state=int(seed if model_seed is None else model_seed),
        n_jobs=1,
    )
    if task_kind == "classification":
        model = RandomForestClassifier(
            criterion="gini",
            max_features="sqrt" if max_features is None else max_features,
            **common,
        )
        model.fit(x_train, y_train.astype(int))
    else:
        model = RandomForestRegressor(
            criterion="squared_error",
            max_features=(1.0 / 3.0) if max_features is None else max_features,
            **common,
        )
        model.fit(x_train, y_train)
    return ForestProbe(
        probe_class="rf",
        factor=factor,
        capacity_index=capacity_index,
        capacity_value=capacity_value,
        task_kind=task_kind,
        n_inputs=x_train.shape[1],
        n_classes=n_classes,
        seed=seed,
        diagnostics={"n_trees": n_trees, "max_depth": max_depth},
        model=model,
    )
