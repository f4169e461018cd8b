"""File formats: signal CSVs, result tables and JSON reports."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def read_signal(path) -> np.ndarray:
    """``n x d`` matrix from a headerless CSV (one node per row)."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: signal contains non-finite values")
    return data


def write_signal(path, B) -> None:
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    lines = [",".join(repr(float(x)) for x in row) for row in B]
    Path(path).write_text("\n".join(lines) + "\n")


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_table(path, header, rows) -> None:
    """CSV of dict ``rows`` keyed by ``header``.

    Floats use ``repr`` so identical runs give identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(row[h]) for h in header])
    Path(path).write_text(buf.getvalue())


def read_table(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)
