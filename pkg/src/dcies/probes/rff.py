"""Random Fourier feature probes: a Gaussian-kernel feature map with a
convex head on top.

Capacity is the number of random features.  The kernel bandwidth comes
from the median heuristic on the train split; the head is closed-form
ridge regression for continuous targets and multinomial logistic
regression for categorical ones, with the regularization strength picked
on the validation split.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from .base import FittedProbe, cross_entropy, mse

RIDGE_GRID = (1e-8, 1e-6, 1e-4, 1e-2)
LOGREG_C_GRID = (1.0, 100.0, 10000.0)
MEDIAN_HEURISTIC_SAMPLE = 1000


def median_bandwidth(codes: np.ndarray, rng: np.random.Generator) -> float:
    """Median pairwise distance over a subsample of the train codes."""
    n = codes.shape[0]
    if n > MEDIAN_HEURISTIC_SAMPLE:
        codes = codes[rng.choice(n, MEDIAN_HEURISTIC_SAMPLE, replace=False)]
    med = float(np.median(pdist(codes)))
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class RffProbe(FittedProbe):
    omega: np.ndarray = None
    phase: np.ndarray = None
    head_weights: np.ndarray = None
    head_bias: np.ndarray = None
    bandwidth: float = 1.0

    def features(self, codes: np.ndarray) -> np.ndarray:
        d = self.omega.shape[1]
        return np.sqrt(2.0 / d) * np.cos(codes @ self.omega + self.phase)

    def predict(self, codes: np.ndarray) -> np.ndarray:
        codes = self._check_schema(codes)
        phi = self.features(codes)
        scores = phi @ self.head_weights + self.head_bias
        if self.task_kind == "regression":
            return scores[:, 0]
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)


def _fit_ridge(phi: np.ndarray, y: np.ndarray, phi_val, y_val):
    n, d = phi.shape
    mean_y = y.mean()
    yc = y - mean_y
    gram = phi.T @ phi
    rhs = phi.T @ yc
    best = None
    for lam in RIDGE_GRID:
        w = np.linalg.solve(gram + lam * n * np.eye(d), rhs)
        val = mse(phi_val @ w + mean_y, y_val)
        if best is None or val < best[0]:
            best = (val, w, lam)
    _, w, lam = best
    return w[:, None], np.asarray([mean_y]), lam


def _fit_logistic(phi, y, phi_val, y_val, n_classes):
    best = None
    for c in LOGREG_C_GRID:
        clf = LogisticRegression(C=c, solver="lbfgs", max_iter=300)
        with warnings.catch_warnings():
            # large-C fits on separable data stop at the iteration cap by
            # design; validation selection decides whether they are used
            warnings.simplefilter("ignore", ConvergenceWarning)
            clf.fit(phi, y)
        proba = _expand_proba(clf.predict_proba(phi_val), clf.classes_, n_classes)
        val = cross_entropy(proba, y_val)
        if best is None or val < best[0]:
            best = (val, clf, c)
    _, clf, c = best
    w = np.zeros((phi.shape[1], n_classes))
    b = np.full(n_classes, -1e3)  # unseen classes get a large negative logit
    classes = clf.classes_.astype(int)
    if len(classes) == 2 and clf.coef_.shape[0] == 1:
        w[:, classes[0]], w[:, classes[1]] = -clf.coef_[0] / 2, clf.coef_[0] / 2
        b[classes[0]], b[classes[1]] = -clf.intercept_[0] / 2, clf.intercept_[0] / 2
    else:
        for pos, cls in enumerate(classes):
            w[:, cls] = clf.coef_[pos]
            b[cls] = clf.intercept_[pos]
    return w, b, c


def _expand_proba(proba, classes, n_classes):
    if proba.shape[1] == n_classes and np.array_equal(classes, np.arange(n_classes)):
        return proba
    full = np.zeros((proba.shape[0], n_classes))
    full[:, classes.astype(int)] = proba
    return full


def fit_rff(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    *,
    n_features: int,
    task_kind: str,
    n_classes: int | None,
    rng: np.random.Generator,
    factor: int = 0,
    capacity_index: int = 0,
    capacity_value: float = 0.0,
    seed: int = 0,
) -> RffProbe:
    l = x_train.shape[1]
    sigma = median_bandwidth(x_train, rng)
    omega = rng.normal(0.0, 1.0 / sigma, size=(l, n_features))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
    scale = np.sqrt(2.0 / n_features)
    phi = scale * np.cos(x_train @ omega + phase)
    phi_val = scale * np.cos(x_val @ omega + phase)

    if task_kind == "regression":
        w, b, reg = _fit_ridge(phi, y_train, phi_val, y_val)
        diag_key = "ridge_lambda"
    else:
        w, b, reg = _fit_logistic(phi, y_train.astype(int), phi_val, y_val.astype(int), int(n_classes))
        diag_key = "logreg_c"

    for a in (omega, phase, w, np.asarray(b, dtype=float)):
        a.flags.writeable = False
    return RffProbe(
        probe_class="rff",
        factor=factor,
        capacity_index=capacity_index,
        capacity_value=capacity_value,
        task_kind=task_kind,
        n_inputs=l,
        n_classes=n_classes,
        seed=seed,
        diagnostics={diag_key: reg, "bandwidth": sigma, "n_features": n_features},
        omega=omega,
        phase=phase,
        head_weights=w,
        head_bias=np.asarray(b, dtype=float),
        bandwidth=sigma,
    )
