"""Command-line entry point.

Subcommands::

    dcies generate      --config cfg.toml       write synthetic dataset files
    dcies train-probes  --config cfg.toml       fit ladders, save checkpoints
    dcies score         --config cfg.toml       scores.json (reuses checkpoints)
    dcies curves        --config cfg.toml       curves.csv + SVG plots
    dcies downstream    --config cfg.toml       downstream + correlations.json
    dcies report        --config cfg.toml       all report files
    dcies run           --config cfg.toml       end-to-end in one process

All subcommands accept ``--config <path>`` and ``--seed <int>`` (replaces
the configured seed list with a single seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .report import emit_report, scores_payload, write_curves_csv
from .stages import run_pipeline, stage_generate, stage_train_probes, write_importances


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="replace the configured seeds with one seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcies", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train-probes", "score", "curves", "downstream", "report", "run"):
        p = sub.add_parser(name)
        _add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config, seed_override=args.seed)
    out = Path(config.output_dir)
    command = args.command

    if command == "generate":
        written = stage_generate(config)
        print(f"wrote {len(written)} dataset files under {out / 'data'}")
        return 0

    if command == "train-probes":
        dirs = stage_train_probes(config)
        print(f"wrote probe checkpoints for {len(dirs)} (representation, probe, seed) combinations")
        return 0

    result = run_pipeline(config, reuse_checkpoints=(command != "run"))

    if command == "score":
        out.mkdir(parents=True, exist_ok=True)
        path = out / "scores.json"
        with open(path, "w") as fh:
            json.dump(scores_payload(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_importances(result, out)
        print(f"wrote {path}")
    elif command == "curves":
        out.mkdir(parents=True, exist_ok=True)
        write_curves_csv(result, out / "curves.csv")
        if config.emit_plots:
            emit_report(result, out, plots=True)
        print(f"wrote {out / 'curves.csv'}")
    elif command == "downstream":
        out.mkdir(parents=True, exist_ok=True)
        from .report import correlations_payload

        path = out / "correlations.json"
        with open(path, "w") as fh:
            json.dump(correlations_payload(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    else:  # report / run
        paths = emit_report(result, out)
        write_importances(result, out)
        print(f"wrote {', '.join(str(p) for p in sorted(set(paths.values())))}")

    for failure in result.failures:
        print(
            f"warning: {failure.representation}/{failure.probe_class}/seed{failure.seed} failed: {failure.error}",
            file=sys.stderr,
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
