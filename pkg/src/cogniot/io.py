"""CSV/JSON readers and writers shared by the CLI."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .lowrank import mask_from_indices


def read_matrix(path) -> np.ndarray:
    """Numeric CSV with a header row."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    body = [r for r in rows[1:] if r]
    try:
        return np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), -1)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric or ragged CSV ({exc})") from exc


def read_table(path) -> tuple:
    """``(header, rows)`` of a CSV file with numeric body."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], read_matrix(path)


def write_matrix(path, m, header=None) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    header = header or [f"c{j}" for j in range(m.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in m:
            w.writerow([repr(float(v)) for v in row])


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_mask(path, shape) -> np.ndarray:
    _, idx = read_table(path)
    if idx.size and (idx.shape[1] != 2 or (idx != np.round(idx)).any()):
        raise ValueError(f"{path}: mask must have two integer columns row,col")
    return mask_from_indices(shape, idx.astype(int))


def write_mask(path, mask) -> None:
    rows, cols = np.nonzero(mask)
    write_rows(path, ["row", "col"], zip(rows.tolist(), cols.tolist()))


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default)


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
