"""Multilayer perceptron probes trained with Adam.

Rung 0 of the ladder is a plain linear probe (no hidden layer); higher
rungs are two-hidden-layer rectifier networks of equal width.  Training
runs mini-batch Adam for a fixed epoch budget and keeps the parameters of
the epoch with the lowest validation loss.

Implemented directly on numpy: the zero-hidden-layer rung, the explicit
validation-epoch selection and seed-level determinism are all part of the
probe contract and easier to guarantee without a framework in between.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FittedProbe, TrainingDiverged, cross_entropy, mse

ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _init_layers(rng: np.random.Generator, dims: list[int]) -> list[np.ndarray]:
    """Fan-in-scaled symmetric (uniform) initialization, biases at zero."""
    params = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def _forward(params: list[np.ndarray], x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns output (pre-softmax logits / raw regression values) + cache."""
    n_layers = len(params) // 2
    cache = [x]
    h = x
    for layer in range(n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        h = h @ w + b
        if layer < n_layers - 1:
            h = np.maximum(h, 0.0)
        cache.append(h)
    return h, cache


def _backward(params, cache, grad_out) -> list[np.ndarray]:
    n_layers = len(params) // 2
    grads = [None] * len(params)
    g = grad_out
    for layer in reversed(range(n_layers)):
        inp = cache[layer]
        grads[2 * layer] = inp.T @ g
        grads[2 * layer + 1] = g.sum(axis=0)
        if layer > 0:
            g = g @ params[2 * layer].T
            g = g * (cache[layer] > 0)
    return grads


@dataclass(frozen=True)
class MlpProbe(FittedProbe):
    params: tuple[np.ndarray, ...] = ()
    width: int = 0

    def predict(self, codes: np.ndarray) -> np.ndarray:
        codes = self._check_schema(codes)
        out, _ = _forward(list(self.params), codes)
        if self.task_kind == "regression":
            return out[:, 0]
        return _softmax(out)

    @property
    def linear_weights(self) -> np.ndarray | None:
        """Input-to-output weight matrix when this probe is linear."""
        if self.width != 0:
            return None
        return self.params[0]


def fit_mlp(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    *,
    width: int,
    task_kind: str,
    n_classes: int | None,
    rng: np.random.Generator,
    epochs: int = 100,
    batch_size: int = 256,
    learning_rate: float = 1e-3,
    factor: int = 0,
    capacity_index: int = 0,
    capacity_value: float = 0.0,
    seed: int = 0,
) -> MlpProbe:
    n, l = x_train.shape
    out_dim = 1 if task_kind == "regression" else int(n_classes)
    dims = [l, out_dim] if width == 0 else [l, width, width, out_dim]
    params = _init_layers(rng, dims)
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]

    if task_kind == "regression":
        y_col = y_train[:, None]

    def val_loss(ps) -> float:
        out, _ = _forward(ps, x_val)
        if task_kind == "regression":
            return mse(out[:, 0], y_val)
        return cross_entropy(_softmax(out), y_val)

    best_val = np.inf
    best_params = [p.copy() for p in params]
    best_epoch = -1
    step = 0
    final_train = np.nan

    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb = x_train[idx]
            out, cache = _forward(params, xb)
            if task_kind == "regression":
                diff = out - y_col[idx]
                loss = float(np.mean(diff**2))
                grad = (2.0 / len(idx)) * diff
            else:
                proba = _softmax(out)
                labels = y_train[idx].astype(int)
                loss = cross_entropy(proba, labels)
                grad = proba.copy()
                grad[np.arange(len(idx)), labels] -= 1.0
                grad /= len(idx)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite train loss at epoch {epoch}")
            epoch_loss += loss * len(idx)
            grads = _backward(params, cache, grad)
            step += 1
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for p, g, m, v in zip(params, grads, m_state, v_state):
                m *= ADAM_BETA1
                m += (1 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1 - ADAM_BETA2) * g**2
                p -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        final_train = epoch_loss / n
        current = val_loss(params)
        if not np.isfinite(current):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        if current < best_val:
            best_val = current
            best_params = [p.copy() for p in params]
            best_epoch = epoch

    for p in best_params:
        p.flags.writeable = False
    return MlpProbe(
        probe_class="mlp",
        factor=factor,
        capacity_index=capacity_index,
        capacity_value=capacity_value,
        task_kind=task_kind,
        n_inputs=l,
        n_classes=n_classes,
        seed=seed,
        diagnostics={
            "final_train_loss": final_train,
            "best_val_loss": float(best_val),
            "best_epoch": best_epoch,
            "epochs": epochs,
        },
        params=tuple(best_params),
        width=width,
    )
