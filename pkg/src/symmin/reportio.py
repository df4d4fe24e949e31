"""Deterministic report serialization: JSON with 17-significant-digit floats,
CSV tables, and plain PGM heatmaps with a min/max sidecar.

Reports must be byte-identical across runs with equal configs, so floats are
formatted explicitly and keys are emitted in sorted order.
"""

from __future__ import annotations

import math

import numpy as np


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON text: sorted keys, floats at 17 significant digits."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad_in}"{k}": {dumps(obj[k], indent + 1)}' for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        items = [f"{pad_in}{dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)}")


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


def write_csv(rows, path, columns=None) -> None:
    """Rows of dicts to CSV with explicit float formatting."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for c in columns:
                v = row.get(c)
                if isinstance(v, (float, np.floating)):
                    cells.append(_fmt_float(float(v)))
                elif v is None:
                    cells.append("")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_pgm(values: np.ndarray, path) -> None:
    """Plain (P2) PGM heatmap of a 2D array plus a JSON sidecar with min/max.

    3D arrays are rendered as the central slice along the last axis.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 3:
        arr = arr[:, :, arr.shape[2] // 2]
    vmin, vmax = float(arr.min()), float(arr.max())
    span = vmax - vmin
    levels = np.zeros(arr.shape, dtype=int) if span == 0 else np.rint(
        255.0 * (arr - vmin) / span).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{arr.shape[1]} {arr.shape[0]}\n255\n")
        for row in levels:
            fh.write(" ".join(str(v) for v in row) + "\n")
    write_json({"min": vmin, "max": vmax}, str(path) + ".json")
