"""Experiment orchestration.

One run = (representation, probe class, seed): build the dataset,
train the capacity ladder, derive the importance matrix at each factor's
best-loss capacity, and score.  Runs are independent and execute on a
thread pool capped by the ``DCIES_THREADS`` environment variable.

For synthetic representations the experiment seed drives factor sampling,
split assignment, probe training and SAGE; the mixing's own parameters
are re-drawn per seed (offset from the configured mixing seed), so
seed-wise standard deviations include generator variability.

A failing combination is recorded and skipped; the experiment only fails
when every combination failed.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from sklearn.ensemble import RandomForestClassifier, RandomForestRegressor
from sklearn.linear_model import LogisticRegression

from ..core import TEST, TRAIN, CodedDataset, ImportanceMatrix, normalize_dataset
from ..data_io import load_dataset
from ..importance import SageConfig, importance_for
from ..metrics import LossCapacityCurve, ScoreReport, explicitness, score_report
from ..probes import build_ladder, rescale, train_ladder
from ..probes.training import LadderResult
from ..synthetic import DownstreamTask, make_dataset, make_downstream_tasks
from .config import ExperimentConfig, RepresentationSource

SCORE_NAMES = ("D", "C", "I", "E", "S")

P_VALUE_CAVEAT = (
    "p-values use the t-approximation and assume normal, independent "
    "observations; read them as rough significance indications, not "
    "exact probabilities"
)


class InsufficientData(Exception):
    pass


class AllRunsFailed(Exception):
    pass


def max_workers() -> int:
    env = os.environ.get("DCIES_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    if len(items) <= 1 or max_workers() == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(fn, items))


def _mixing_for_seed(rep: RepresentationSource, seed: int):
    return replace(rep.mixing, seed=rep.mixing.seed + 7919 * seed)


def build_run_dataset(rep: RepresentationSource, config: ExperimentConfig, seed: int) -> CodedDataset:
    if rep.is_synthetic:
        raw = make_dataset(
            config.factor_specs,
            _mixing_for_seed(rep, seed),
            config.n_samples,
            seed=seed,
            split_fractions=config.split_fractions,
            grid_points=config.grid_points,
        )
    else:
        raw = load_dataset(
            rep.codes_path, rep.factors_path, rep.specs_path, rep.split_path,
            split_seed=seed, split_fractions=config.split_fractions,
        )
    return normalize_dataset(raw)


@dataclass(frozen=True)
class RunResult:
    representation: str
    probe_class: str
    seed: int
    report: ScoreReport
    curves: tuple[LossCapacityCurve, ...]
    extra_scale_curves: dict = field(default_factory=dict)  # scale -> curves
    importance: ImportanceMatrix | None = None
    ladder_result: LadderResult | None = None
    dataset: CodedDataset | None = None


@dataclass(frozen=True)
class FailedRun:
    representation: str
    probe_class: str
    seed: int
    error: str


def _curves_for(ladder, result: LadderResult) -> tuple[LossCapacityCurve, ...]:
    return tuple(
        LossCapacityCurve(
            factor=j,
            capacities=ladder.capacities,
            losses=result.normalized_losses(pos),
            capacity_scale=ladder.scale,
        )
        for pos, j in enumerate(result.factors)
    )


def _provenance(rep_name, probe_class, seed, ladder, result, config) -> dict:
    out = {
        "representation": rep_name,
        "probe_class": probe_class,
        "seed": seed,
        "capacity_scale": ladder.scale,
        "capacities": [float(c) for c in ladder.capacities],
        "ladder_params": [e.params for e in ladder.entries],
        "importance_capacity": config.importance_capacity,
        "best_capacity_index": list(result.best_index),
    }
    if probe_class == "mlp":
        # parameter-count capacities depend on the code dimension, so MLP
        # grids are not comparable across representations of different size
        out["capacity_grid_input_dependent"] = True
    return out


def run_single(
    rep: RepresentationSource,
    probe_class: str,
    seed: int,
    config: ExperimentConfig,
    dataset: CodedDataset | None = None,
    keep_artifacts: bool = False,
) -> RunResult:
    dataset = dataset if dataset is not None else build_run_dataset(rep, config, seed)
    overrides = config.ladder_overrides.get(probe_class, {})
    ladder = build_ladder(probe_class, dataset.n_codes, dataset.n_factors, overrides)
    if config.capacity_scales:
        ladder = rescale(ladder, config.capacity_scales[0])
    result = train_ladder(dataset, ladder, seed=seed, config=config.training)
    curves = _curves_for(ladder, result)
    extra = {}
    for scale in config.capacity_scales[1:]:
        extra[scale] = _curves_for(rescale(ladder, scale), result)

    if config.importance_capacity == "best":
        probes = [result.best_probe(pos) for pos in range(len(result.factors))]
    else:
        idx = int(config.importance_capacity)
        probes = [result.probes[pos][idx] for pos in range(len(result.factors))]
    sage = replace(
        config.sage,
        seed=int(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(rep.name.encode()), 202)).generate_state(1)[0]),
    )
    matrix = importance_for(
        probe_class, probes, dataset, sage, use_coefficients=config.use_coefficients
    )
    report = score_report(
        matrix,
        list(curves),
        verdict_tol=config.verdict_tol,
        linear_first_capacity=(probe_class == "mlp"),
        provenance=_provenance(rep.name, probe_class, seed, ladder, result, config),
    )
    return RunResult(
        representation=rep.name,
        probe_class=probe_class,
        seed=seed,
        report=report,
        curves=curves,
        extra_scale_curves=extra,
        importance=matrix,
        ladder_result=result if keep_artifacts else None,
        dataset=dataset if keep_artifacts else None,
    )


@dataclass(frozen=True)
class CorrelationReport:
    """Pearson/Spearman correlations of each score with mean downstream
    performance, with t-approximation p-values."""

    probe_class: str
    downstream_kind: str
    n_points: int
    per_score: dict  # score name -> {pearson, pearson_p, spearman, spearman_p}
    per_task_type: dict  # "regression"/"classification" -> same structure
    caveat: str = P_VALUE_CAVEAT


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0:
        return 0.0
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    return pearson(stats.rankdata(x), stats.rankdata(y))


def correlation_p_value(rho: float, n: int) -> float:
    """Two-sided p under the t-statistic t = rho * sqrt((n-2)/(1-rho^2))."""
    if n < 3:
        return float("nan")
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho**2))
    return float(2.0 * stats.t.sf(abs(t), df=n - 2))


def correlate(
    scores: dict[str, np.ndarray],
    performance: np.ndarray,
    probe_class: str = "",
    downstream_kind: str = "",
    per_task_type: dict[str, np.ndarray] | None = None,
) -> CorrelationReport:
    """Correlate score vectors against mean downstream performance."""
    performance = np.asarray(performance, dtype=float)
    n = performance.size
    if n < 3:
        raise InsufficientData(f"need at least 3 paired observations, got {n}")

    def block(perf: np.ndarray) -> dict:
        out = {}
        for name, vec in scores.items():
            vec = np.asarray(vec, dtype=float)
            if vec.size != perf.size:
                raise InsufficientData(f"score {name} has {vec.size} points, performance has {perf.size}")
            rp = pearson(vec, perf)
            rs = spearman(vec, perf)
            out[name] = {
                "pearson": rp,
                "pearson_p": correlation_p_value(rp, perf.size),
                "spearman": rs,
                "spearman_p": correlation_p_value(rs, perf.size),
            }
        return out

    per_type = {}
    for kind, perf in (per_task_type or {}).items():
        per_type[kind] = block(np.asarray(perf, dtype=float))
    return CorrelationReport(
        probe_class=probe_class,
        downstream_kind=downstream_kind,
        n_points=n,
        per_score=block(performance),
        per_task_type=per_type,
    )


def _r_squared(pred: np.ndarray, y: np.ndarray) -> float:
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 0.0
    return max(0.0, 1.0 - ss_res / ss_tot)


def _fit_low_capacity(kind, x_train, y_train, task, seed, config):
    """Low-capacity downstream heads: linear for mlp, depth-10 forest for rf.

    The linear heads are fit by their convex argmin (least squares /
    logistic regression) since that is exactly the best member of the
    linear class the gradient path approximates.
    """
    if kind == "mlp":
        if task == "regression":
            a = np.column_stack([x_train, np.ones(len(x_train))])
            w, *_ = np.linalg.lstsq(a, y_train, rcond=None)
            return lambda x: np.column_stack([x, np.ones(len(x))]) @ w
        classes = np.unique(y_train.astype(int))
        if len(classes) == 1:
            # degenerate median threshold (discrete factor): the constant
            # predictor is the argmin over the linear class
            only = int(classes[0])
            return lambda x: np.full(len(x), only)
        clf = LogisticRegression(C=100.0, solver="lbfgs", max_iter=300)
        clf.fit(x_train, y_train.astype(int))
        return clf.predict
    if task == "regression":
        model = RandomForestRegressor(
            n_estimators=config.downstream.rf_n_trees,
            max_depth=config.downstream.rf_max_depth,
            max_features=1.0 / 3.0, random_state=seed, n_jobs=1,
        )
    else:
        model = RandomForestClassifier(
            n_estimators=config.downstream.rf_n_trees,
            max_depth=config.downstream.rf_max_depth,
            max_features="sqrt", random_state=seed, n_jobs=1,
        )
    model.fit(x_train, y_train.astype(int) if task == "classification" else y_train)
    return model.predict


def downstream_performance(
    dataset: CodedDataset,
    tasks: list[DownstreamTask],
    labels: np.ndarray,
    kind: str,
    config: ExperimentConfig,
    seed: int,
) -> dict:
    """Mean test performance of low-capacity probes over all tasks.

    Regression tasks score R-squared (clamped to [0, 1]); classification
    tasks score accuracy.  Returns the overall mean plus per-task and
    per-task-type breakdowns.
    """
    x_train, x_test = dataset.codes_for(TRAIN), dataset.codes_for(TEST)
    train, test = dataset.mask(TRAIN), dataset.mask(TEST)
    per_task = {}
    by_type = {"regression": [], "classification": []}
    for t, task in enumerate(tasks):
        y_train, y_test = labels[train, t], labels[test, t]
        predict = _fit_low_capacity(kind, x_train, y_train, task.kind, seed, config)
        pred = predict(x_test)
        if task.kind == "regression":
            perf = _r_squared(pred, y_test)
        else:
            perf = float(np.mean(pred.astype(int) == y_test.astype(int)))
        per_task[task.task_id] = perf
        by_type[task.kind].append(perf)
    return {
        "mean": float(np.mean(list(per_task.values()))),
        "per_task": per_task,
        "per_type": {k: float(np.mean(v)) if v else None for k, v in by_type.items()},
    }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    runs: tuple[RunResult, ...]
    failures: tuple[FailedRun, ...]
    aggregates: dict
    downstream: dict  # (rep, seed, kind) -> performance dict
    correlations: tuple[CorrelationReport, ...]


def _aggregate(runs: tuple[RunResult, ...]) -> dict:
    groups: dict[tuple[str, str], list[ScoreReport]] = {}
    for run in runs:
        groups.setdefault((run.representation, run.probe_class), []).append(run.report)
    out = {}
    for (rep, pc), reports in sorted(groups.items()):
        values = {
            "D": [r.d for r in reports],
            "C": [r.c for r in reports],
            "I": [r.i for r in reports],
            "E": [r.e for r in reports],
            "S": [r.s for r in reports],
        }
        out[f"{rep}/{pc}"] = {
            "n_seeds": len(reports),
            "mean": {k: float(np.mean(v)) for k, v in values.items()},
            "std": {k: float(np.std(v)) for k, v in values.items()},
        }
    return out


def _correlations(config, runs, downstream) -> tuple[CorrelationReport, ...]:
    if not downstream:
        return ()
    pairings = []
    for pc in config.probe_classes:
        for kind in config.downstream.probe_kinds:
            if config.downstream.cross_pairing or pc == kind or (pc == "rff" and kind == "mlp"):
                pairings.append((pc, kind))
    reports = []
    for pc, kind in pairings:
        xs: dict[str, list[float]] = {s: [] for s in ("D", "C", "I", "E")}
        perf, reg_perf, cls_perf = [], [], []
        for run in runs:
            if run.probe_class != pc:
                continue
            entry = downstream.get((run.representation, run.seed, kind))
            if entry is None:
                continue
            xs["D"].append(run.report.d)
            xs["C"].append(run.report.c)
            xs["I"].append(run.report.i)
            xs["E"].append(run.report.e)
            perf.append(entry["mean"])
            reg_perf.append(entry["per_type"]["regression"])
            cls_perf.append(entry["per_type"]["classification"])
        if len(perf) < 3:
            continue
        per_type = {}
        if all(v is not None for v in reg_perf):
            per_type["regression"] = reg_perf
        if all(v is not None for v in cls_perf):
            per_type["classification"] = cls_perf
        reports.append(
            correlate(
                {k: np.asarray(v) for k, v in xs.items()},
                np.asarray(perf),
                probe_class=pc,
                downstream_kind=kind,
                per_task_type=per_type,
            )
        )
    return tuple(reports)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    combos = [
        (rep, pc, seed)
        for rep in config.representations
        for pc in config.probe_classes
        for seed in config.seeds
    ]

    # one dataset per (representation, seed), shared across probe classes
    datasets: dict[tuple[str, int], CodedDataset | Exception] = {}

    def build(key):
        rep, seed = key
        try:
            return build_run_dataset(rep, config, seed)
        except Exception as err:  # recorded per combo below
            return err

    keys = sorted({(rep, seed) for rep, _, seed in combos}, key=lambda k: (k[0].name, k[1]))
    for key, ds in zip(keys, parallel_map(build, keys)):
        datasets[(key[0].name, key[1])] = ds

    def execute(combo):
        rep, pc, seed = combo
        ds = datasets[(rep.name, seed)]
        if isinstance(ds, Exception):
            return FailedRun(rep.name, pc, seed, f"dataset: {ds}")
        try:
            return run_single(rep, pc, seed, config, dataset=ds)
        except Exception as err:
            return FailedRun(rep.name, pc, seed, str(err))

    outcomes = parallel_map(execute, combos)
    runs = tuple(o for o in outcomes if isinstance(o, RunResult))
    failures = tuple(o for o in outcomes if isinstance(o, FailedRun))
    if not runs:
        raise AllRunsFailed("; ".join(f"{f.representation}/{f.probe_class}/s{f.seed}: {f.error}" for f in failures))

    downstream: dict = {}
    if config.downstream.enabled:
        for rep in config.representations:
            for seed in config.seeds:
                ds = datasets[(rep.name, seed)]
                if isinstance(ds, Exception):
                    continue
                tasks, labels = make_downstream_tasks(
                    config.factor_specs, ds,
                    n_reg=config.downstream.n_reg, n_cls=config.downstream.n_cls,
                    seed=seed,
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


def explicitness_under_scale(run: RunResult, scale: str) -> float:
    """Mean per-factor explicitness recomputed under another capacity scale."""
    curves = run.extra_scale_curves.get(scale)
    if curves is None:
        raise KeyError(f"scale {scale!r} was not configured for this run")
    return float(np.mean([explicitness(c) for c in curves]))
