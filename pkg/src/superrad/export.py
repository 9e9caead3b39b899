"""CSV/JSON writers. Floats are written with ``repr`` so they round-trip exactly."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> dict:
    """Columns of a numeric CSV as float arrays keyed by header name."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [[] for _ in header]
    return {h: np.array([float(v) for v in col]) for h, col in zip(header, cols)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if f != f or f in (float("inf"), float("-inf")):
            return str(f)
        return f
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")
    return path


def write_population_csv(path, times, populations, reference) -> Path:
    return write_csv(
        path,
        ["time_us", "population", "exponential_reference"],
        zip(times, populations, reference),
    )


def write_snapshot_csv(path, positions, populations) -> Path:
    rows = ((i, x, y, z, p) for i, ((x, y, z), p) in enumerate(zip(positions.tolist(), populations)))
    return write_csv(path, ["atom_index", "x_um", "y_um", "z_um", "population"], rows)


def write_profile_csv(path, profile) -> Path:
    g = profile.grid
    return write_csv(
        path,
        ["theta_rad", "phi_rad", "weight_sr", "density_per_sr"],
        zip(g.theta, g.phi, g.weights, profile.density),
    )
