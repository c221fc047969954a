"""Deterministic table and matrix writers (17 significant digits)."""

from __future__ import annotations

import csv
import json
import os

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: str, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def jsonable(obj):
    """Convert arrays and complex numbers to plain JSON data (complex as ``[re, im]``)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _num(x):
    x = float(x)
    if not np.isfinite(x):
        return str(x)
    return float("%.17g" % x)


def write_json(path: str, obj) -> str:
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, indent=1)
        fh.write("\n")
    return path


def complex_matrix(data) -> np.ndarray:
    """Inverse of the ``[re, im]`` encoding for a nested list."""
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
