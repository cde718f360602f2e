"""Cut-cell finite differences for -Δu = f(u) with zero Dirichlet data.

The mesh is a uniform Cartesian lattice with one node on the domain centre, so
lattice symmetries match the domain's. Nodes next to the boundary carry
Shortley–Weller arm fractions: the distance along each grid line to the
boundary, in units of h, located by bisection on the signed distance.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import linalg as splinalg

from ._validation import check_count, check_positive
from .errors import SolverError, ValidationError
from .nonlinearity import eval_f

log = logging.getLogger(__name__)

# arm order used throughout: east, west, north, south
DIRECTIONS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
INTERIOR_TOL = 1e-9
BISECTION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    domain: object
    h: float
    origin: np.ndarray
    nx: int
    ny: int
    mask: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    ix: np.ndarray = field(repr=False)
    iy: np.ndarray = field(repr=False)
    arms: np.ndarray = field(repr=False)
    cut: np.ndarray = field(repr=False)
    k0: tuple = (0, 0)

    @property
    def n_interior(self):
        return len(self.ix)

    @cached_property
    def points(self):
        return self.node_xy(self.ix, self.iy)

    @cached_property
    def near_boundary(self):
        """Nodes with at least one arm ending on the boundary."""
        return self.cut.any(axis=1)

    def node_xy(self, ix, iy):
        # offsets from the centre node keep mirror-image nodes bitwise symmetric
        c = self.domain.center
        return np.column_stack([c[0] + self.h * (np.asarray(ix) + self.k0[0]),
                                c[1] + self.h * (np.asarray(iy) + self.k0[1])])

    def neighbor(self, k):
        """Dense index of the neighbour in arm direction k, or -1."""
        dx, dy = DIRECTIONS[k]
        jx, jy = self.ix + dx, self.iy + dy
        ok = (jx >= 0) & (jx < self.nx) & (jy >= 0) & (jy < self.ny)
        out = np.full(self.n_interior, -1)
        out[ok] = self.index[jy[ok], jx[ok]]
        return out

    @cached_property
    def neg_laplacian(self):
        """Sparse matrix of -Δ_h (Shortley–Weller)."""
        h2 = self.h * self.h
        n = self.n_interior
        rows, cols, vals = [], [], []
        diag = np.zeros(n)
        for axis, (k_plus, k_minus) in enumerate(((0, 1), (2, 3))):
            tp = self.arms[:, k_plus]
            tm = self.arms[:, k_minus]
            diag += 2.0 / (h2 * tp * tm)
            for k, th, other in ((k_plus, tp, tm), (k_minus, tm, tp)):
                nb = self.neighbor(k)
                use = (~self.cut[:, k]) & (nb >= 0)
                rows.append(np.nonzero(use)[0])
                cols.append(nb[use])
                vals.append(-2.0 / (h2 * th[use] * (th[use] + other[use])))
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return A.tocsr()

    @cached_property
    def _lu(self):
        return splinalg.splu(self.neg_laplacian.tocsc())

    @cached_property
    def torsion_max(self):
        return float(np.max(solve_linear_poisson(self, np.ones(self.n_interior)).values))

    def full_array(self, values, fill=np.nan):
        """Scatter per-node values into a (ny, nx) array."""
        out = np.full((self.ny, self.nx), fill, dtype=float)
        out[self.iy, self.ix] = values
        return out


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_interior,):
            raise ValidationError("fdsolver", "Field", f"expected {self.grid.n_interior} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def max(self):
        return float(self.values.max())

    def argmax_point(self):
        return self.grid.points[int(np.argmax(self.values))]

    def __mul__(self, alpha):
        return Field(self.grid, self.values * alpha)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SolveReport:
    field: Field
    picard_iters: int
    final_update: float
    residual: float
    certified_contraction: float
    damping: float = 1.0

    @property
    def certified(self):
        return self.certified_contraction < 1.0

    @property
    def status(self):
        return "certified" if self.certified else "uncertified"

    def summary(self):
        return {
            "picard_iters": self.picard_iters,
            "final_update": self.final_update,
            "residual": self.residual,
            "certified_contraction": self.certified_contraction,
            "status": self.status,
            "damping": self.damping,
            "max_value": self.field.max(),
            "n_interior": self.field.grid.n_interior,
            "h": self.field.grid.h,
        }


def _bisect_arms(domain, start, direction, h):
    """Fraction t in (0, 1] with sdf(start + t h direction) = 0, per row."""
    end = start + h * direction
    theta = np.ones(len(start))
    outside = domain.sdf(end) > 0
    if np.any(outside):
        lo = np.zeros(outside.sum())
        hi = np.ones(outside.sum())
        p0 = start[outside]
        dv = h * direction[outside]
        while np.max(hi - lo) > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            inside = domain.sdf(p0 + mid[:, None] * dv) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        theta[outside] = 0.5 * (lo + hi)
    return theta


def build_grid(domain, h):
    """Lattice of interior nodes (sdf <= -1e-9 h) with Shortley–Weller arms."""
    h = check_positive(h, "h", "fdsolver", "build_grid")
    stats = domain.stats()
    if not h < stats.inradius / 4:
        raise ValidationError("fdsolver", "build_grid", f"h={h} must be < inradius/4 = {stats.inradius / 4}")
    lo, hi = domain.bounding_box()
    c = domain.center
    k_lo = np.floor((lo - c) / h).astype(int) - 1
    k_hi = np.ceil((hi - c) / h).astype(int) + 1
    nx, ny = (k_hi - k_lo + 1).tolist()
    kx = np.arange(k_lo[0], k_hi[0] + 1)
    ky = np.arange(k_lo[1], k_hi[1] + 1)
    X, Y = np.meshgrid(c[0] + h * kx, c[1] + h * ky)
    d = domain.sdf(np.column_stack([X.ravel(), Y.ravel()])).reshape(ny, nx)
    mask = d <= -INTERIOR_TOL * h
    if not mask.any():
        raise SolverError("fdsolver", "build_grid", "no interior nodes")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise SolverError("fdsolver", "build_grid", f"interior node set has {ncomp} components")
    iy, ix = np.nonzero(mask)
    index = np.full((ny, nx), -1)
    index[iy, ix] = np.arange(len(ix))
    origin = np.array([c[0] + h * k_lo[0], c[1] + h * k_lo[1]])
    pts = np.column_stack([c[0] + h * (ix + k_lo[0]), c[1] + h * (iy + k_lo[1])])

    arms = np.ones((len(ix), 4))
    cut = np.zeros((len(ix), 4), bool)
    for k, (dx, dy) in enumerate(DIRECTIONS):
        jx, jy = ix + dx, iy + dy
        nb_in = mask[jy, jx]  # the padded bounding box keeps jx, jy in range
        cut[:, k] = ~nb_in
        if np.any(~nb_in):
            dirs = np.broadcast_to(np.array([dx, dy], float), (int((~nb_in).sum()), 2))
            arms[~nb_in, k] = _bisect_arms(domain, pts[~nb_in], dirs, h)
    grid = Grid(domain, h, origin, nx, ny, mask, index, ix, iy, arms, cut, (int(k_lo[0]), int(k_lo[1])))
    log.debug("built grid h=%g with %d interior nodes", h, grid.n_interior)
    return grid


def apply_laplacian(grid, u):
    """Δ_h u with zero boundary values at arm intersections."""
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    return Field(grid, -(grid.neg_laplacian @ values))


def solve_linear_poisson(grid, rhs, max_refinements=5):
    """Solve -Δ_h u = rhs by sparse LU with iterative refinement.

    The contract is ||-Δ_h u - rhs||_inf <= 1e-10 ||rhs||_inf.
    """
    b = rhs.values if isinstance(rhs, Field) else np.asarray(rhs, float)
    A = grid.neg_laplacian
    u = grid._lu.solve(b)
    bound = 1e-10 * max(np.max(np.abs(b)), np.finfo(float).tiny)
    for _ in range(max_refinements):
        r = b - A @ u
        if np.max(np.abs(r)) <= bound:
            break
        u = u + grid._lu.solve(r)
    else:
        r = b - A @ u
        if np.max(np.abs(r)) > bound:
            raise SolverError("fdsolver", "solve_linear_poisson",
                              f"residual {np.max(np.abs(r)):.3e} above {bound:.3e} after refinement")
    return Field(grid, u)


def torsion(grid):
    return solve_linear_poisson(grid, np.ones(grid.n_interior))


def solve_semilinear(grid, f, tol=1e-10, max_iters=10_000, damping=0.5):
    """Picard iteration u_{k+1} = (-Δ_h)^{-1} f(u_k) from u_0 = 0.

    The contraction factor sup f' * max((-Δ_h)^{-1} 1) is reported; when it is
    >= 1 the run is flagged uncertified and damped with factor `damping`.
    """
    if not f.is_positive:
        raise ValidationError("fdsolver", "solve_semilinear", f"nonlinearity {f} is not positive on [0, inf)")
    tol = check_positive(tol, "tol", "fdsolver", "solve_semilinear")
    max_iters = check_count(max_iters, "max_iters", "fdsolver", "solve_semilinear")
    ratio = f.sup_d1 * grid.torsion_max
    beta = 1.0 if ratio < 1.0 else damping
    A = grid.neg_laplacian
    u = np.zeros(grid.n_interior)
    update = residual = np.inf
    stalled = 0
    for it in range(1, max_iters + 1):
        new = solve_linear_poisson(grid, eval_f(f, np.maximum(u, 0.0))).values
        if beta != 1.0:
            new = (1.0 - beta) * u + beta * new
        if not np.all(np.isfinite(new)):
            raise SolverError("fdsolver", "solve_semilinear", f"non-finite iterate at Picard step {it}")
        update = float(np.max(np.abs(new - u)))
        u = new
        if update <= tol:
            # keep going until the residual meets tol too, or stops improving
            # (its rounding floor can sit above tol when ||A|| ||u|| is large)
            previous = residual
            residual = float(np.max(np.abs(A @ u - eval_f(f, np.maximum(u, 0.0)))))
            stalled = stalled + 1 if residual > 0.9 * previous else 0
            if residual <= tol or stalled >= 3:
                break
    else:
        raise SolverError("fdsolver", "solve_semilinear",
                          f"no convergence in {max_iters} iterations (last update {update:.3e})")
    return SolveReport(Field(grid, u), it, update, residual, ratio, beta)
