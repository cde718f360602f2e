"""Deterministic CSV/JSON output: floats always printed with 17 significant digits."""

import csv
import json
import math

import numpy as np

from .errors import ValidationError
from .fdsolver import Field


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, float, bool, np.number, np.bool_)) or obj is None:
        return _fmt(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_table_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_table_csv(path):
    """(header, float array of rows)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError("serialize", "read_csv", f"{path} is empty")
    header = rows[0]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise ValidationError("serialize", "read_csv", f"{path}: {exc}")
    return header, data


def write_field_csv(path, field, name="value"):
    """One row (x, y, value) per interior node, in row-major lattice order."""
    pts = field.grid.points
    write_table_csv(path, ["x", "y", name], zip(pts[:, 0], pts[:, 1], field.values))


def read_field_csv(path, grid=None):
    """Points and values; with a matching grid, a Field."""
    header, data = read_table_csv(path)
    if len(header) != 3 or header[:2] != ["x", "y"]:
        raise ValidationError("serialize", "read_field_csv", f"{path}: expected columns x, y, value")
    if grid is None:
        return data[:, :2], data[:, 2]
    if not np.array_equal(data[:, :2], grid.points):
        raise ValidationError("serialize", "read_field_csv", f"{path}: node coordinates do not match the grid")
    return Field(grid, data[:, 2])
