"""File formats for datasets.

* codes file: CSV with header ``c0,...,c{L-1}``, one row per sample.
* factors file: CSV with the factor names as header, numeric values.
* factor-spec file: JSON array of ``{name, kind, cardinality?}``.
* split file: optional CSV with a single ``split`` column; when absent the
  caller assigns splits by configured fractions with a seeded shuffle.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import SPLIT_NAMES, CodedDataset, FactorSpec, assign_splits


def _read_csv_matrix(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.asarray(rows, dtype=float)


def _write_csv_matrix(path: Path, header: list[str], values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in values:
            writer.writerow([format(v, ".17g") for v in row])


def load_factor_specs(path: str | Path) -> tuple[FactorSpec, ...]:
    with open(path) as fh:
        entries = json.load(fh)
    return tuple(
        FactorSpec(name=e["name"], kind=e["kind"], cardinality=e.get("cardinality"))
        for e in entries
    )


def save_factor_specs(specs, path: str | Path) -> None:
    entries = []
    for spec in specs:
        e = {"name": spec.name, "kind": spec.kind}
        if spec.cardinality is not None:
            e["cardinality"] = spec.cardinality
        entries.append(e)
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2)
        fh.write("\n")


def load_dataset(
    codes_path: str | Path,
    factors_path: str | Path,
    specs_path: str | Path,
    split_path: str | Path | None = None,
    split_seed: int = 0,
    split_fractions=(0.7, 0.1, 0.2),
) -> CodedDataset:
    """Assemble an (unnormalized) dataset from its on-disk parts."""
    code_header, codes = _read_csv_matrix(Path(codes_path))
    expected = [f"c{i}" for i in range(codes.shape[1])]
    if code_header != expected:
        raise ValueError(f"codes header {code_header!r} != {expected!r}")
    specs = load_factor_specs(specs_path)
    factor_header, factors = _read_csv_matrix(Path(factors_path))
    if factor_header != [s.name for s in specs]:
        raise ValueError("factors header does not match factor-spec names")
    if split_path is not None:
        with open(split_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["split"]:
                raise ValueError(f"split header {header!r} != ['split']")
            split = np.asarray([row[0] for row in reader if row])
        bad = set(np.unique(split)) - set(SPLIT_NAMES)
        if bad:
            raise ValueError(f"unknown split labels {sorted(bad)} in {split_path}")
    else:
        split = assign_splits(codes.shape[0], split_seed, split_fractions)
    return CodedDataset(codes=codes, factors=factors, factor_specs=specs, split=split)


def save_dataset(dataset: CodedDataset, directory: str | Path) -> dict[str, Path]:
    """Write the four dataset files into ``directory`` and return the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "codes": directory / "codes.csv",
        "factors": directory / "factors.csv",
        "factor_specs": directory / "factor_specs.json",
        "split": directory / "split.csv",
    }
    _write_csv_matrix(paths["codes"], [f"c{i}" for i in range(dataset.n_codes)], dataset.codes)
    _write_csv_matrix(paths["factors"], [s.name for s in dataset.factor_specs], dataset.factors)
    save_factor_specs(dataset.factor_specs, paths["factor_specs"])
    with open(paths["split"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split"])
        for label in dataset.split:
            writer.writerow([label])
    return paths
