"""Bilinear interpolation of node fields, extended two layers past the boundary.

Ghost nodes (lattice nodes outside the domain near an interior node)
receive values from a least-squares linear fit to nearby valid nodes, optionally
anchored by a known boundary value at the Shortley–Weller arm intersections.
Every point inside the domain then sits in a cell whose four corners carry
values. Queries landing in a cell with an invalid corner are reported as
not evaluable rather than extrapolated.
"""

import numpy as np
from scipy import ndimage

from .fdsolver import DIRECTIONS

_GHOST_RADIUS = 3


class GridInterpolator:
    def __init__(self, grid, values, valid=None, boundary_value=None):
        self.grid = grid
        values = np.asarray(values, float)
        valid = np.isfinite(values) if valid is None else (np.asarray(valid, bool) & np.isfinite(values))
        ny, nx = grid.ny, grid.nx
        self.table = np.full((ny, nx), np.nan)
        self.table[grid.iy[valid], grid.ix[valid]] = values[valid]
        ok = np.isfinite(self.table)

        # ghost candidates: non-interior lattice nodes within two rings of a valid
        # node (a cell can clip the domain with all four corners outside)
        near = ndimage.binary_dilation(ok, structure=np.ones((5, 5), bool))
        ghosts = near & ~grid.mask
        gy, gx = np.nonzero(ghosts)
        if len(gx):
            self.table[gy, gx] = self._ghost_values(gx, gy, valid, values, boundary_value)

    def _ghost_values(self, gx, gy, valid, values, boundary_value):
        grid = self.grid
        r = _GHOST_RADIUS
        offs = np.array([(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
                         if dx * dx + dy * dy <= r * r + 0.5])
        jx = np.clip(gx[:, None] + offs[None, :, 0], 0, grid.nx - 1)
        jy = np.clip(gy[:, None] + offs[None, :, 1], 0, grid.ny - 1)
        idx = grid.index[jy, jx]
        has = idx >= 0
        take = np.where(has, idx, 0)
        w = has & valid[take]
        X = [offs[None, :, 0] + 0.0 * jx]
        Y = [offs[None, :, 1] + 0.0 * jy]
        V = [np.where(w, values[take], 0.0)]
        W = [w]
        if boundary_value is not None:
            for k, (ex, ey) in enumerate(DIRECTIONS):
                cut = has & grid.cut[take, k]
                th = grid.arms[take, k]
                X.append(offs[None, :, 0] + ex * th)
                Y.append(offs[None, :, 1] + ey * th)
                V.append(np.full(jx.shape, float(boundary_value)))
                W.append(cut)
        X = np.concatenate([np.broadcast_to(a, jx.shape) for a in X], axis=1)
        Y = np.concatenate([np.broadcast_to(a, jx.shape) for a in Y], axis=1)
        V = np.concatenate(V, axis=1)
        W = np.concatenate(W, axis=1).astype(float)
        basis = np.stack([np.ones_like(X), X, Y], axis=2)
        M = np.einsum("gp,gpi,gpj->gij", W, basis, basis)
        rhs = np.einsum("gp,gpi,gp->gi", W, basis, V)
        enough = (W.sum(axis=1) >= 3) & (np.abs(np.linalg.det(M)) > 1e-10)
        out = np.full(len(gx), np.nan)
        if np.any(enough):
            out[enough] = np.linalg.solve(M[enough], rhs[enough][..., None])[:, 0, 0]
        return out

    def __call__(self, points):
        """Interpolated values and an evaluable mask for (k, 2) points."""
        grid = self.grid
        pts = np.atleast_2d(np.asarray(points, float))
        c = grid.domain.center
        fx = (pts[:, 0] - c[0]) / grid.h - grid.k0[0]
        fy = (pts[:, 1] - c[1]) / grid.h - grid.k0[1]
        i = np.floor(fx).astype(int)
        j = np.floor(fy).astype(int)
        inside = (i >= 0) & (j >= 0) & (i < grid.nx - 1) & (j < grid.ny - 1)
        i = np.where(inside, i, 0)
        j = np.where(inside, j, 0)
        tx = fx - i
        ty = fy - j
        t = self.table
        v00, v10, v01, v11 = t[j, i], t[j, i + 1], t[j + 1, i], t[j + 1, i + 1]
        val = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11
        ok = inside & np.isfinite(val)
        return np.where(ok, val, np.nan), ok
