"""Staged pipeline: dataset files, probe checkpoints, score emission.

The output directory is the state store between CLI stages::

    out/
      data/<representation>/seed<k>/codes.csv ...
      probes/<representation>/<probe>/seed<k>/*.probe + ladder.json
      scores.json  curves.csv  correlations.json  plots/*.svg

``score``/``curves``/``downstream`` reuse probe checkpoints written by
``train-probes`` when they match the configured ladder; otherwise they
train in place.  Reuse cannot change results: evaluation and importance
are deterministic given the checkpointed probes and the config seeds.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from ..core import CodedDataset
from ..data_io import save_dataset
from ..importance import save_importance
from ..probes import baseline_loss, build_ladder, evaluate_probe, load_probe, rescale, save_probe
from ..probes.checkpoints import checkpoint_name
from ..probes.training import LadderResult, train_ladder
from .config import ExperimentConfig
from .runner import (
    ExperimentResult,
    FailedRun,
    RunResult,
    _aggregate,
    _correlations,
    build_run_dataset,
    downstream_performance,
    parallel_map,
    run_single,
)
from ..synthetic import make_downstream_tasks


def data_dir(config: ExperimentConfig, rep_name: str, seed: int) -> Path:
    return Path(config.output_dir) / "data" / rep_name / f"seed{seed}"


def probe_dir(config: ExperimentConfig, rep_name: str, probe_class: str, seed: int) -> Path:
    return Path(config.output_dir) / "probes" / rep_name / probe_class / f"seed{seed}"


def stage_generate(config: ExperimentConfig) -> list[Path]:
    """Write synthetic dataset files for every (representation, seed)."""
    written = []
    for rep in config.representations:
        if not rep.is_synthetic:
            continue
        for seed in config.seeds:
            dataset = build_run_dataset(rep, config, seed)
            paths = save_dataset(dataset, data_dir(config, rep.name, seed))
            written.extend(paths.values())
    return written


def _ladder_meta(ladder) -> dict:
    return {
        "probe_class": ladder.probe_class,
        "scale": ladder.scale,
        "n_inputs": ladder.n_inputs,
        "entries": [{"index": e.index, "capacity": e.capacity, "params": e.params} for e in ladder.entries],
    }


def save_ladder_result(result: LadderResult, directory: Path, seed: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for row in result.probes:
        for probe in row:
            save_probe(probe, directory)
    meta = _ladder_meta(result.ladder)
    meta["seed"] = seed
    with open(directory / "ladder.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(directory / "losses.csv", "w") as fh:
        fh.write("factor,capacity_index,raw,normalized\n")
        for row in result.losses:
            for pl in row:
                fh.write(f"{pl.factor},{pl.capacity_index},{pl.raw!r},{pl.normalized!r}\n")


def load_ladder_result(
    dataset: CodedDataset, ladder, directory: Path, seed: int
) -> LadderResult | None:
    """Rebuild a LadderResult from checkpoints, or None on any mismatch."""
    meta_path = directory / "ladder.json"
    if not meta_path.exists():
        return None
    with open(meta_path) as fh:
        meta = json.load(fh)
    expected = _ladder_meta(ladder)
    if (
        meta.get("probe_class") != expected["probe_class"]
        or meta.get("seed") != seed
        or meta.get("n_inputs") != expected["n_inputs"]
        or [e["params"] for e in meta.get("entries", [])] != [e["params"] for e in expected["entries"]]
    ):
        return None
    probes, losses = [], []
    for j in range(dataset.n_factors):
        row_p, row_l = [], []
        for entry in ladder.entries:
            path = directory / f"{ladder.probe_class}_f{j}_t{entry.index}_s{seed}.probe"
            if not path.exists():
                return None
            probe = load_probe(path)
            row_p.append(probe)
            row_l.append(evaluate_probe(probe, dataset))
        probes.append(tuple(row_p))
        losses.append(tuple(row_l))
    best_idx = [int(np.argmin([pl.normalized for pl in row])) for row in losses]
    return LadderResult(
        ladder=ladder,
        losses=tuple(losses),
        probes=tuple(probes),
        baselines=tuple(baseline_loss(dataset, j) for j in range(dataset.n_factors)),
        best_index=tuple(best_idx),
        best_loss=tuple(float(row[i].normalized) for row, i in zip(losses, best_idx)),
        factors=tuple(range(dataset.n_factors)),
    )


def stage_train_probes(config: ExperimentConfig) -> list[Path]:
    """Train every ladder and write probe checkpoints."""
    written = []

    def one(combo):
        rep, pc, seed = combo
        dataset = build_run_dataset(rep, config, seed)
        ladder = build_ladder(pc, dataset.n_codes, dataset.n_factors, config.ladder_overrides.get(pc, {}))
        if config.capacity_scales:
            ladder = rescale(ladder, config.capacity_scales[0])
        result = train_ladder(dataset, ladder, seed=seed, config=config.training)
        directory = probe_dir(config, rep.name, pc, seed)
        save_ladder_result(result, directory, seed)
        return directory

    combos = [
        (rep, pc, seed)
        for rep in config.representations
        for pc in config.probe_classes
        for seed in config.seeds
    ]
    for directory in parallel_map(one, combos):
        written.append(directory)
    return written


def _cached_dataset_builder(config: ExperimentConfig):
    cache: dict[tuple[str, int], CodedDataset] = {}

    def get(rep, seed) -> CodedDataset:
        key = (rep.name, seed)
        if key not in cache:
            cache[key] = build_run_dataset(rep, config, seed)
        return cache[key]

    return get


def run_pipeline(config: ExperimentConfig, reuse_checkpoints: bool = True) -> ExperimentResult:
    """Full pipeline, loading checkpointed probes where they match."""
    get_dataset = _cached_dataset_builder(config)

    def execute(combo):
        rep, pc, seed = combo
        try:
            dataset = get_dataset(rep, seed)
            cached = None
            if reuse_checkpoints:
                ladder = build_ladder(pc, dataset.n_codes, dataset.n_factors, config.ladder_overrides.get(pc, {}))
                if config.capacity_scales:
                    ladder = rescale(ladder, config.capacity_scales[0])
                cached = load_ladder_result(dataset, ladder, probe_dir(config, rep.name, pc, seed), seed)
            if cached is None:
                return run_single(rep, pc, seed, config, dataset=dataset)
            return _score_from_result(rep, pc, seed, config, dataset, cached)
        except Exception as err:
            return FailedRun(rep.name, pc, seed, str(err))

    combos = [
        (rep, pc, seed)
        for rep in config.representations
        for pc in config.probe_classes
        for seed in config.seeds
    ]
    outcomes = parallel_map(execute, combos)
    runs = tuple(o for o in outcomes if isinstance(o, RunResult))
    failures = tuple(o for o in outcomes if isinstance(o, FailedRun))
    if not runs:
        from .runner import AllRunsFailed

        raise AllRunsFailed(
            "; ".join(f"{f.representation}/{f.probe_class}/s{f.seed}: {f.error}" for f in failures)
        )

    downstream: dict = {}
    if config.downstream.enabled:
        for rep in config.representations:
            for seed in config.seeds:
                try:
                    ds = get_dataset(rep, seed)
                except Exception:
                    continue
                tasks, labels = make_downstream_tasks(
                    config.factor_specs, ds,
                    n_reg=config.downstream.n_reg, n_cls=config.downstream.n_cls, seed=seed,
                )
                for kind in config.downstream.probe_kinds:
                    downstream[(rep.name, seed, kind)] = downstream_performance(
                        ds, tasks, labels, kind, config, seed
                    )

    return ExperimentResult(
        config=config,
        runs=runs,
        failures=failures,
        aggregates=_aggregate(runs),
        downstream=downstream,
        correlations=_correlations(config, runs, downstream),
    )


def _score_from_result(rep, pc, seed, config, dataset, result: LadderResult) -> RunResult:
    """Score a combo from an already-fitted ladder (checkpoint path)."""
    from dataclasses import replace as dc_replace

    from ..importance import importance_for
    from ..metrics import LossCapacityCurve, score_report

    ladder = result.ladder
    curves = tuple(
        LossCapacityCurve(
            factor=j, capacities=ladder.capacities,
            losses=result.normalized_losses(pos), capacity_scale=ladder.scale,
        )
        for pos, j in enumerate(result.factors)
    )
    extra = {}
    for scale in config.capacity_scales[1:]:
        scaled = rescale(ladder, scale)
        extra[scale] = tuple(
            LossCapacityCurve(
                factor=j, capacities=scaled.capacities,
                losses=result.normalized_losses(pos), capacity_scale=scale,
            )
            for pos, j in enumerate(result.factors)
        )
    if config.importance_capacity == "best":
        probes = [result.best_probe(pos) for pos in range(len(result.factors))]
    else:
        idx = int(config.importance_capacity)
        probes = [result.probes[pos][idx] for pos in range(len(result.factors))]
    sage = dc_replace(
        config.sage,
        seed=int(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(rep.name.encode()), 202)).generate_state(1)[0]),
    )
    matrix = importance_for(pc, probes, dataset, sage, use_coefficients=config.use_coefficients)
    from .runner import _provenance

    provenance = _provenance(rep.name, pc, seed, ladder, result, config)
    provenance["from_checkpoints"] = True
    report = score_report(
        matrix, list(curves),
        verdict_tol=config.verdict_tol,
        linear_first_capacity=(pc == "mlp"),
        provenance=provenance,
    )
    return RunResult(
        representation=rep.name, probe_class=pc, seed=seed,
        report=report, curves=curves, extra_scale_curves=extra, importance=matrix,
    )


def write_importances(result: ExperimentResult, output_dir: Path) -> list[Path]:
    out = []
    imp_dir = output_dir / "importance"
    imp_dir.mkdir(parents=True, exist_ok=True)
    for run in result.runs:
        if run.importance is None:
            continue
        path = imp_dir / f"{run.representation}_{run.probe_class}_seed{run.seed}.csv"
        save_importance(
            run.importance, path,
            meta={
                "representation": run.representation,
                "probe": run.probe_class,
                "seed": run.seed,
                "best_capacity_index": run.report.provenance.get("best_capacity_index"),
            },
        )
        out.append(path)
    return out
