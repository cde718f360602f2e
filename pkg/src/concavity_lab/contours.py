"""Level-curve rendering of scattered lattice fields to SVG."""

import os

import numpy as np
from skimage import measure

from .errors import ValidationError
from .serialize import read_table_csv

_COLORS = ("#1f4e79", "#2e75b6", "#3fa34d", "#c9a227", "#c0504d", "#7030a0")


def _lattice(points, values):
    """Scatter (x, y, value) rows onto the smallest enclosing lattice, NaN elsewhere."""
    xs = np.unique(points[:, 0])
    ys = np.unique(points[:, 1])
    h = min(np.min(np.diff(xs)) if len(xs) > 1 else 1.0, np.min(np.diff(ys)) if len(ys) > 1 else 1.0)
    x0, y0 = xs[0] - h, ys[0] - h
    i = np.rint((points[:, 0] - x0) / h).astype(int)
    j = np.rint((points[:, 1] - y0) / h).astype(int)
    # one layer of zeros around the data closes curves at the boundary
    table = np.zeros((j.max() + 2, i.max() + 2))
    table[j, i] = values
    return table, x0, y0, h


def contour_paths(points, values, levels):
    """Marching-squares polylines in world coordinates at `levels` equispaced
    values strictly between 0 and max."""
    vmax = float(np.max(values))
    if not vmax > 0:
        raise ValidationError("contours", "render_contours", "field has no positive values")
    table, x0, y0, h = _lattice(points, values)
    heights = vmax * np.arange(1, levels + 1) / (levels + 1)
    out = []
    for lev in heights:
        curves = measure.find_contours(table, lev)
        out.append((float(lev), [np.column_stack([x0 + h * c[:, 1], y0 + h * c[:, 0]]) for c in curves]))
    return out


def render_contours(csv_path, svg_path, levels=5, size=480):
    """Write an SVG of `levels` level curves of the field in `csv_path`.

    Nothing is written when the input is malformed or empty.
    """
    if int(levels) < 1:
        raise ValidationError("contours", "render_contours", f"levels must be >= 1, got {levels}")
    try:
        header, data = read_table_csv(csv_path)
    except OSError as exc:
        raise ValidationError("contours", "render_contours", str(exc))
    if len(header) != 3 or data.shape[0] == 0:
        raise ValidationError("contours", "render_contours", f"{csv_path}: empty or malformed field")
    if not np.all(np.isfinite(data)):
        raise ValidationError("contours", "render_contours", f"{csv_path}: non-finite entries")
    paths = contour_paths(data[:, :2], data[:, 2], int(levels))

    lo = data[:, :2].min(axis=0)
    hi = data[:, :2].max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (size - 20) / span

    def tx(p):
        return 10 + (p[:, 0] - lo[0]) * scale, size - 10 - (p[:, 1] - lo[1]) * scale

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for k, (lev, curves) in enumerate(paths):
        color = _COLORS[k % len(_COLORS)]
        for c in curves:
            X, Y = tx(c)
            d = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(X, Y))
            lines.append(f'<polyline data-level="{lev:.17g}" fill="none" stroke="{color}" stroke-width="1" points="{d}"/>')
    lines.append("</svg>")
    tmp = svg_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, svg_path)
    return paths
