"""Report emission: scores.json, curves.csv, correlations.json, SVG plots.

scores.json is schema-versioned and byte-stable: re-running the same
config with the same seeds reproduces it exactly apart from the
``created_at`` field.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .runner import CorrelationReport, ExperimentResult, RunResult

SCHEMA_VERSION = 1

CURVE_COLUMNS = (
    "representation", "probe", "seed", "factor",
    "capacity", "capacity_scale", "normalized_loss",
)


class IoError(Exception):
    """Report emission failed; carries the offending path."""

    def __init__(self, path, cause):
        self.path = str(path)
        super().__init__(f"{path}: {cause}")


def scores_payload(result: ExperimentResult, created_at: str | None = None) -> dict:
    runs = []
    for run in sorted(result.runs, key=lambda r: (r.representation, r.probe_class, r.seed)):
        entry = {
            "representation": run.representation,
            "probe": run.probe_class,
            "seed": run.seed,
        }
        entry.update(run.report.to_json_dict())
        runs.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "created_at": created_at or datetime.now(timezone.utc).isoformat(),
        "config_digest": result.config.digest(),
        "runs": runs,
        "aggregates": result.aggregates,
        "failures": [asdict(f) for f in result.failures],
    }


def _curve_rows(run: RunResult):
    for curves in [run.curves, *run.extra_scale_curves.values()]:
        for curve in curves:
            for cap, loss in zip(curve.capacities, curve.losses):
                yield (
                    run.representation, run.probe_class, run.seed, curve.factor,
                    format(float(cap), ".12g"), curve.capacity_scale,
                    format(float(loss), ".12g"),
                )


def write_curves_csv(result: ExperimentResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for run in sorted(result.runs, key=lambda r: (r.representation, r.probe_class, r.seed)):
            writer.writerows(_curve_rows(run))


def correlations_payload(result: ExperimentResult) -> dict:
    downstream = {
        f"{rep}/seed{seed}/{kind}": entry
        for (rep, seed, kind), entry in sorted(result.downstream.items())
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "downstream_performance": downstream,
        "correlations": [asdict(c) for c in result.correlations],
    }


def _plot_curves(result: ExperimentResult, plot_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups: dict[tuple[str, str, str], list] = {}
    for run in result.runs:
        for curves in [run.curves, *run.extra_scale_curves.values()]:
            scale = curves[0].capacity_scale
            groups.setdefault((run.representation, run.probe_class, scale), []).append(curves)

    written = []
    for (rep, pc, scale), seed_curves in sorted(groups.items()):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        # factor-averaged curve per seed, plus the seed mean
        per_seed = []
        for curves in seed_curves:
            caps = curves[0].capacities
            mean_loss = np.mean([c.losses for c in curves], axis=0)
            per_seed.append(mean_loss)
            ax.plot(caps, mean_loss, color="tab:blue", alpha=0.35, linewidth=1)
        ax.plot(caps, np.mean(per_seed, axis=0), color="tab:blue", linewidth=2, label="seed mean")
        ax.set_xlabel(f"capacity ({scale} scale)")
        ax.set_ylabel("normalized test loss")
        ax.set_title(f"{rep} / {pc}")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = plot_dir / f"curve_{rep}_{pc}_{scale}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def emit_report(result: ExperimentResult, output_dir: str | Path, plots: bool | None = None) -> dict[str, Path]:
    """Write all report files; returns the paths written."""
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise IoError(output_dir, err) from err

    paths: dict[str, Path] = {}

    def dump_json(name: str, payload: dict) -> Path:
        path = output_dir / name
        try:
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as err:
            raise IoError(path, err) from err
        return path

    paths["scores"] = dump_json("scores.json", scores_payload(result))
    try:
        curves_path = output_dir / "curves.csv"
        write_curves_csv(result, curves_path)
        paths["curves"] = curves_path
    except OSError as err:
        raise IoError(output_dir / "curves.csv", err) from err
    paths["correlations"] = dump_json("correlations.json", correlations_payload(result))

    if plots if plots is not None else result.config.emit_plots:
        plot_dir = output_dir / "plots"
        try:
            plot_dir.mkdir(exist_ok=True)
            for p in _plot_curves(result, plot_dir):
                paths[p.stem] = p
        except OSError as err:
            raise IoError(plot_dir, err) from err
    return paths
