"""Capacity ladders: ordered probe sizes with a recorded capacity scale.

Each probe class measures capacity differently:

* mlp: number of parameters beyond the linear probe (rung 0 is the linear
  probe itself, later rungs are two-hidden-layer nets of growing width).
  Log scale is ``log10(1 + excess)``.
* rf: maximum tree depth.  Linear scale is the depth itself.
* rff: random feature count.  Log scale is ``log2(count)``.

The scale is carried on the ladder because the explicitness score
integrates over capacity and therefore changes with the scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import PROBE_CLASSES, ConfigError

DEFAULT_MLP_WIDTH_FACTORS = (2, 4, 8, 16, 32, 64, 128, 256, 512)
DEFAULT_RF_DEPTHS = (1, 2, 4, 8, 16, 32)
DEFAULT_RFF_LOG2_FEATURES = tuple(range(4, 18))

DEFAULT_SCALES = {"mlp": "log", "rf": "linear", "rff": "log"}


@dataclass(frozen=True)
class LadderEntry:
    """One rung: the size knob plus its capacity value under the scale."""

    index: int
    capacity: float
    params: dict


@dataclass(frozen=True)
class CapacityLadder:
    probe_class: str
    entries: tuple[LadderEntry, ...]
    scale: str
    n_inputs: int

    @property
    def capacities(self) -> np.ndarray:
        return np.asarray([e.capacity for e in self.entries], dtype=float)

    def __len__(self) -> int:
        return len(self.entries)


def mlp_excess_params(width: int, n_inputs: int) -> int:
    """Parameters of a two-hidden-layer net beyond the linear probe.

    Counted with a single output unit so every factor shares one grid;
    width 0 denotes the linear probe itself (zero excess).
    """
    if width == 0:
        return 0
    l = n_inputs
    linear = l + 1
    hidden = l * width + width + width * width + width + width + 1
    return hidden - linear


def _mlp_capacity(width: int, n_inputs: int, scale: str) -> float:
    excess = mlp_excess_params(width, n_inputs)
    return float(np.log10(1 + excess)) if scale == "log" else float(excess)


def _rf_capacity(depth: int, scale: str) -> float:
    return float(np.log2(depth)) if scale == "log" else float(depth)


def _rff_capacity(log2_features: int, scale: str) -> float:
    return float(log2_features) if scale == "log" else float(2**log2_features)


def build_ladder(
    probe_class: str,
    n_inputs: int,
    n_factors: int,
    config: dict | None = None,
    scale: str | None = None,
) -> CapacityLadder:
    """Construct the capacity ladder for a probe class.

    ``config`` may override the per-class size lists: ``mlp_width_factors``
    (multiples of the factor count, 0 meaning the linear rung is implied
    anyway), ``rf_depths``, ``rff_log2_features``.
    """
    if probe_class not in PROBE_CLASSES:
        raise ConfigError(f"unknown probe class {probe_class!r}")
    config = config or {}
    scale = scale or config.get("scale") or DEFAULT_SCALES[probe_class]
    if scale not in ("log", "linear"):
        raise ConfigError(f"unknown capacity scale {scale!r}")

    if probe_class == "mlp":
        factors = config.get("mlp_width_factors", DEFAULT_MLP_WIDTH_FACTORS)
        widths = [0] + [int(f) * n_factors for f in factors if f != 0]
        entries = [
            LadderEntry(i, _mlp_capacity(w, n_inputs, scale), {"width": w})
            for i, w in enumerate(widths)
        ]
    elif probe_class == "rf":
        depths = [int(d) for d in config.get("rf_depths", DEFAULT_RF_DEPTHS)]
        entries = [
            LadderEntry(i, _rf_capacity(d, scale), {"max_depth": d})
            for i, d in enumerate(depths)
        ]
    else:
        log2s = [int(p) for p in config.get("rff_log2_features", DEFAULT_RFF_LOG2_FEATURES)]
        entries = [
            LadderEntry(i, _rff_capacity(p, scale), {"n_features": 2**p})
            for i, p in enumerate(log2s)
        ]

    caps = [e.capacity for e in entries]
    if len(entries) < 2:
        raise ConfigError(f"{probe_class} ladder needs at least two rungs, got {len(entries)}")
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ConfigError(f"{probe_class} capacities must be strictly increasing: {caps}")
    return CapacityLadder(probe_class=probe_class, entries=tuple(entries), scale=scale, n_inputs=n_inputs)


def rescale(ladder: CapacityLadder, scale: str) -> CapacityLadder:
    """Same rungs, capacity values recomputed under another scale."""
    if scale == ladder.scale:
        return ladder
    entries = []
    for e in ladder.entries:
        if ladder.probe_class == "mlp":
            cap = _mlp_capacity(e.params["width"], ladder.n_inputs, scale)
        elif ladder.probe_class == "rf":
            cap = _rf_capacity(e.params["max_depth"], scale)
        else:
            cap = _rff_capacity(int(np.log2(e.params["n_features"])), scale)
        entries.append(LadderEntry(e.index, cap, e.params))
    return CapacityLadder(ladder.probe_class, tuple(entries), scale, ladder.n_inputs)
