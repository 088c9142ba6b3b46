"""CSV snapshots, profiles and JSON run manifests."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

OUTPUT_ENV = "SWLBM_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "swlbm-out"))


def write_snapshot_csv(path, x, y, h, ux, uy, mask=None) -> Path:
    """One row per node: x, y, h, u1, u2. Solid nodes are skipped."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "h", "u1", "u2"])
        for i, xi in enumerate(x):
            for j, yj in enumerate(y):
                if mask is not None and not mask[i, j]:
                    continue
                w.writerow([repr(float(xi)), repr(float(yj)), repr(float(h[i, j])),
                            repr(float(ux[i, j])), repr(float(uy[i, j]))])
    return path


def write_profile_csv(path, columns: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    names = list(columns)
    n = len(next(iter(columns.values())))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for k in range(n):
            w.writerow([repr(float(columns[c][k])) for c in names])
    return path


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path, manifest: dict) -> Path:
    """JSON with non-finite floats written as null."""
    path = Path(path)
    path.write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return path


def read_config(path) -> dict:
    """Load a config file; a manifest is accepted and its ``config`` section used."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data
