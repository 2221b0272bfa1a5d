"""Experiment configuration: a TOML file with documented defaults.

Minimal example::

    output_dir = "out"
    seeds = [0, 1, 2]
    n_samples = 20000
    probe_classes = ["mlp", "rf"]

    [[representations]]
    name = "noisy"
    kind = "noisy"
    noise_std = 0.1

    [[representations]]
    name = "from-files"
    codes = "data/codes.csv"
    factors = "data/factors.csv"
    factor_specs = "data/factor_specs.json"
    # split = "data/split.csv"        # optional

    [factors]                         # synthetic factor set
    continuous = 4
    categorical = [6, 3, 2]

    [ladders.mlp]
    mlp_width_factors = [2, 8, 32]

    [training]
    epochs = 100
    learning_rate = 1e-3

    [sage]
    n_permutations = 32

    [downstream]
    enabled = true
    rf_max_depth = 10
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..core import FactorSpec
from ..importance import SageConfig
from ..probes import PROBE_CLASSES, ConfigError, TrainingConfig
from ..synthetic import MIXING_KINDS, MixingSpec, desk_specs


@dataclass(frozen=True)
class RepresentationSource:
    """One representation to evaluate: synthetic mixing or code files."""

    name: str
    mixing: MixingSpec | None = None
    codes_path: str | None = None
    factors_path: str | None = None
    specs_path: str | None = None
    split_path: str | None = None

    @property
    def is_synthetic(self) -> bool:
        return self.mixing is not None


@dataclass(frozen=True)
class DownstreamConfig:
    enabled: bool = False
    n_reg: int | None = None
    n_cls: int | None = None
    probe_kinds: tuple[str, ...] = ("mlp", "rf")
    rf_max_depth: int = 10
    rf_n_trees: int = 100
    cross_pairing: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    representations: tuple[RepresentationSource, ...]
    probe_classes: tuple[str, ...] = ("mlp", "rff", "rf")
    seeds: tuple[int, ...] = (0,)
    n_samples: int = 20000
    split_fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    factor_specs: tuple[FactorSpec, ...] = field(default_factory=desk_specs)
    ladder_overrides: dict = field(default_factory=dict)
    capacity_scales: tuple[str, ...] = ()  # () = each class's default scale
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sage: SageConfig = field(default_factory=SageConfig)
    downstream: DownstreamConfig = field(default_factory=DownstreamConfig)
    output_dir: str = "dcies-out"
    verdict_tol: float = 0.05
    importance_capacity: str | int = "best"
    use_coefficients: bool = False
    emit_plots: bool = True
    grid_points: int = 64

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.representations:
            raise ConfigError("need at least one representation")
        for pc in self.probe_classes:
            if pc not in PROBE_CLASSES:
                raise ConfigError(f"unknown probe class {pc!r}")
        for scale in self.capacity_scales:
            if scale not in ("log", "linear"):
                raise ConfigError(f"unknown capacity scale {scale!r}")
        for rep in self.representations:
            if rep.is_synthetic:
                continue
            for path in (rep.codes_path, rep.factors_path, rep.specs_path):
                if path is None:
                    raise ConfigError(f"representation {rep.name!r}: missing file path")
                if not Path(path).exists():
                    raise ConfigError(f"representation {rep.name!r}: {path} does not exist")
            if rep.split_path is not None and not Path(rep.split_path).exists():
                raise ConfigError(f"representation {rep.name!r}: {rep.split_path} does not exist")

    def digest(self) -> str:
        """Hash of the experiment inputs (excludes presentation fields)."""

        def default(o):
            if isinstance(o, (FactorSpec, MixingSpec, TrainingConfig, SageConfig)):
                return asdict(o)
            if isinstance(o, (RepresentationSource, DownstreamConfig)):
                return asdict(o)
            return str(o)

        payload = asdict(self)
        payload.pop("output_dir", None)
        payload.pop("emit_plots", None)
        payload = json.dumps(payload, sort_keys=True, default=default)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_factor_specs(section: dict) -> tuple[FactorSpec, ...]:
    if not section:
        return desk_specs()
    if "specs" in section:  # explicit list of {name, kind, cardinality?}
        return tuple(
            FactorSpec(e["name"], e["kind"], e.get("cardinality")) for e in section["specs"]
        )
    specs: list[FactorSpec] = []
    for i in range(int(section.get("continuous", 0))):
        specs.append(FactorSpec(f"f{i}", "continuous"))
    offset = len(specs)
    for i, card in enumerate(section.get("categorical", [])):
        specs.append(FactorSpec(f"f{offset + i}", "categorical", int(card)))
    if not specs:
        raise ConfigError("factor section defines no factors")
    return tuple(specs)


def _parse_representation(entry: dict) -> RepresentationSource:
    name = entry.get("name")
    if not name:
        raise ConfigError("every representation needs a name")
    if "codes" in entry:
        return RepresentationSource(
            name=name,
            codes_path=entry["codes"],
            factors_path=entry.get("factors"),
            specs_path=entry.get("factor_specs"),
            split_path=entry.get("split"),
        )
    kind = entry.get("kind")
    if kind not in MIXING_KINDS:
        raise ConfigError(f"representation {name!r}: unknown mixing kind {kind!r}")
    mixing = MixingSpec(
        kind=kind,
        noise_std=float(entry.get("noise_std", 0.1 if kind == "noisy" else 0.0)),
        seed=int(entry.get("mixing_seed", 0)),
        out_dim=entry.get("out_dim"),
        depth=int(entry.get("depth", 2)),
        width=int(entry.get("width", 16)),
    )
    return RepresentationSource(name=name, mixing=mixing)


def load_config(path: str | Path, seed_override: int | None = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    reps = tuple(_parse_representation(e) for e in raw.get("representations", []))
    seeds = tuple(int(s) for s in raw.get("seeds", [0]))
    if seed_override is not None:
        seeds = (int(seed_override),)
    training = TrainingConfig(**raw.get("training", {}))
    sage = SageConfig(**raw.get("sage", {}))
    downstream_raw = dict(raw.get("downstream", {}))
    if "probe_kinds" in downstream_raw:
        downstream_raw["probe_kinds"] = tuple(downstream_raw["probe_kinds"])
    downstream = DownstreamConfig(**downstream_raw)
    return ExperimentConfig(
        representations=reps,
        probe_classes=tuple(raw.get("probe_classes", ["mlp", "rff", "rf"])),
        seeds=seeds,
        n_samples=int(raw.get("n_samples", 20000)),
        split_fractions=tuple(raw.get("split_fractions", (0.7, 0.1, 0.2))),
        factor_specs=_parse_factor_specs(raw.get("factors", {})),
        ladder_overrides=raw.get("ladders", {}),
        capacity_scales=tuple(raw.get("capacity_scales", [])),
        training=training,
        sage=sage,
        downstream=downstream,
        output_dir=raw.get("output_dir", "dcies-out"),
        verdict_tol=float(raw.get("verdict_tol", 0.05)),
        importance_capacity=raw.get("importance_capacity", "best"),
        use_coefficients=bool(raw.get("use_coefficients", False)),
        emit_plots=bool(raw.get("emit_plots", True)),
        grid_points=int(raw.get("grid_points", 64)),
    )
