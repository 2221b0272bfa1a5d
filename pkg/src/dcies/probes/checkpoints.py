"""Probe checkpoints: self-describing files keyed by what was fitted.

Each checkpoint is a joblib archive holding a schema version, the probe's
identifying metadata and its parameters.  Filenames encode
(probe_class, factor, capacity index, seed) so a run directory is
browsable without opening anything.
"""

from __future__ import annotations

from pathlib import Path

import joblib

from .base import FittedProbe, ProbeError

SCHEMA_VERSION = 1


class CheckpointError(ProbeError):
    pass


def checkpoint_name(probe: FittedProbe) -> str:
    return f"{probe.probe_class}_f{probe.factor}_t{probe.capacity_index}_s{probe.seed}.probe"


def save_probe(probe: FittedProbe, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / checkpoint_name(probe)
    joblib.dump({"schema_version": SCHEMA_VERSION, "probe": probe}, path)
    return path


def load_probe(path: str | Path) -> FittedProbe:
    payload = joblib.load(path)
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise CheckpointError(f"{path}: not a probe checkpoint")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: schema version {payload['schema_version']} unsupported (want {SCHEMA_VERSION})"
        )
    return payload["probe"]
