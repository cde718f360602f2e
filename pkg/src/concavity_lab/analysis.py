"""Hessians of grid solutions and concavity verdicts.

Deep inside the mesh the Hessian comes from centred second differences. Next
to the boundary, and on the boundary itself, it comes from a least-squares
polynomial fit through nearby node values and the zero Dirichlet data at arm
intersections (and, on the boundary, along the boundary arc).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_count
from .errors import ValidationError
from .fdsolver import DIRECTIONS, Field, solve_semilinear, build_grid
from .geometry import boundary_sample, make_domain, DomainSpec
from .interpolation import GridInterpolator
from .nonlinearity import constant, eval_f

FIT_RADIUS = 3.0
COND_MAX = 1e8


def eig2(uxx, uxy, uyy):
    """Eigenvalues (min, max) of symmetric 2x2 matrices, elementwise."""
    mean = 0.5 * (uxx + uyy)
    rad = np.hypot(0.5 * (uxx - uyy), uxy)
    return mean - rad, mean + rad


def _monomials(x, y, degree):
    terms = [np.ones_like(x), x, y, x * x, x * y, y * y]
    if degree >= 3:
        terms += [x**3, x * x * y, x * y * y, y**3]
    return np.stack(terms, axis=-1)


def _batched_fit(X, Y, V, W, degree, scale, trace=None):
    """Weighted LS polynomial fits, one per row; X, Y in units of `scale`.

    With `trace`, the fitted Laplacian at the origin is pinned to that value
    (equality-constrained least squares). Returns (uxx, uxy, uyy, ux, uy, ok)
    in physical units.
    """
    B = _monomials(X, Y, degree)
    M = np.einsum("gp,gpi,gpj->gij", W, B, B)
    rhs = np.einsum("gp,gpi,gp->gi", W, B, V)
    n_coef = B.shape[-1]
    ok = W.sum(axis=1) >= n_coef
    cond = np.full(len(W), np.inf)
    if np.any(ok):
        cond[ok] = np.linalg.cond(M[ok])
    ok &= cond <= COND_MAX
    if trace is not None:
        row = np.zeros(n_coef)
        row[3] = row[5] = 2.0
        K = np.zeros((len(W), n_coef + 1, n_coef + 1))
        K[:, :n_coef, :n_coef] = M
        K[:, n_coef, :n_coef] = row
        K[:, :n_coef, n_coef] = row
        M = K
        rhs = np.concatenate([rhs, np.broadcast_to(np.asarray(trace, float) * scale**2, (len(W),))[:, None]], axis=1)
    coef = np.full((len(W), rhs.shape[1]), np.nan)
    if np.any(ok):
        coef[ok] = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    s2 = scale * scale
    return 2 * coef[:, 3] / s2, coef[:, 4] / s2, 2 * coef[:, 5] / s2, coef[:, 1] / scale, coef[:, 2] / scale, ok


def _window_data(grid, values, cx, cy, bx, by, radius):
    """Node values and zero arm-intersection points near centres (bx, by).

    (cx, cy) are lattice indices of the window centres; (bx, by) the fit
    centres in lattice units. Returns X, Y (lattice units, relative), V, W.
    """
    r = int(math.ceil(radius)) + 1
    offs = np.array([(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)])
    jx = np.clip(cx[:, None] + offs[None, :, 0], 0, grid.nx - 1)
    jy = np.clip(cy[:, None] + offs[None, :, 1], 0, grid.ny - 1)
    idx = grid.index[jy, jx]
    has = idx >= 0
    take = np.where(has, idx, 0)
    X = [jx - bx[:, None]]
    Y = [jy - by[:, None]]
    V = [np.where(has, values[take], 0.0)]
    W = [has & np.isfinite(V[0])]
    for k, (ex, ey) in enumerate(DIRECTIONS):
        th = grid.arms[take, k]
        X.append(jx - bx[:, None] + ex * th)
        Y.append(jy - by[:, None] + ey * th)
        V.append(np.zeros(jx.shape))
        W.append(has & grid.cut[take, k])
    X = np.concatenate(X, axis=1).astype(float)
    Y = np.concatenate(Y, axis=1).astype(float)
    V = np.concatenate(V, axis=1)
    W = np.concatenate(W, axis=1)
    W &= X * X + Y * Y <= radius * radius + 1e-9
    V = np.where(W, V, 0.0)
    return X, Y, V, W.astype(float)


@dataclass(frozen=True, eq=False)
class HessianField:
    grid: object
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    evaluable: np.ndarray
    centered: np.ndarray

    @property
    def lam_min(self):
        return eig2(self.uxx, self.uxy, self.uyy)[0]

    @property
    def lam_max(self):
        return eig2(self.uxx, self.uxy, self.uyy)[1]

    @property
    def trace(self):
        return self.uxx + self.uyy

    def directional(self, n):
        """(∂u/∂n, ∂²u/∂n²) node fields for a unit vector n."""
        n = np.asarray(n, float)
        d1 = self.ux * n[0] + self.uy * n[1]
        d2 = self.uxx * n[0] ** 2 + 2 * self.uxy * n[0] * n[1] + self.uyy * n[1] ** 2
        return d1, d2

    def at(self, points):
        """Bilinearly interpolated (uxx, uxy, uyy) at points, plus evaluable mask."""
        out = []
        ok = np.ones(len(np.atleast_2d(points)), bool)
        for comp in (self.uxx, self.uxy, self.uyy):
            v, good = GridInterpolator(self.grid, comp, self.evaluable)(points)
            out.append(v)
            ok &= good
        return out[0], out[1], out[2], ok


def hessian_field(grid, u, radius=FIT_RADIUS):
    """Gradient and Hessian at every node (centred stencil or constrained fit)."""
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    h = grid.h
    n = grid.n_interior
    U = grid.full_array(values)
    ix, iy = grid.ix, grid.iy

    def at(dx, dy):
        return U[iy + dy, ix + dx]

    full = np.ones(n, bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            full &= grid.mask[iy + dy, ix + dx]
    uxx = np.full(n, np.nan)
    uxy = np.full(n, np.nan)
    uyy = np.full(n, np.nan)
    ux = np.full(n, np.nan)
    uy = np.full(n, np.nan)
    c = full
    uxx[c] = ((at(1, 0) - 2 * U[iy, ix] + at(-1, 0)) / h**2)[c]
    uyy[c] = ((at(0, 1) - 2 * U[iy, ix] + at(0, -1)) / h**2)[c]
    uxy[c] = ((at(1, 1) - at(-1, 1) - at(1, -1) + at(-1, -1)) / (4 * h**2))[c]
    ux[c] = ((at(1, 0) - at(-1, 0)) / (2 * h))[c]
    uy[c] = ((at(0, 1) - at(0, -1)) / (2 * h))[c]

    evaluable = full.copy()
    rest = np.nonzero(~full)[0]
    if len(rest):
        X, Y, V, W = _window_data(grid, values, ix[rest], iy[rest], ix[rest].astype(float),
                                  iy[rest].astype(float), radius)
        fxx, fxy, fyy, fx, fy, ok = _batched_fit(X / radius, Y / radius, V, W, 2, radius * h)
        uxx[rest], uxy[rest], uyy[rest], ux[rest], uy[rest] = fxx, fxy, fyy, fx, fy
        evaluable[rest] = ok
    return HessianField(grid, uxx, uxy, uyy, ux, uy, evaluable, full)


@dataclass(frozen=True, eq=False)
class BoundaryHessian:
    arclength: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    evaluable: np.ndarray

    @property
    def lam_min(self):
        return eig2(self.uxx, self.uxy, self.uyy)[0]

    @property
    def lam_max(self):
        return eig2(self.uxx, self.uxy, self.uyy)[1]

    @property
    def normal_second_derivative(self):
        nx, ny = self.normals[:, 0], self.normals[:, 1]
        return self.uxx * nx * nx + 2 * self.uxy * nx * ny + self.uyy * ny * ny

    def rows(self):
        """(arclength, λ_max, λ_min, ∂²u/∂ν²) per probe, as in the public contract."""
        return list(zip(self.arclength.tolist(), self.lam_max.tolist(), self.lam_min.tolist(),
                        self.normal_second_derivative.tolist()))

    def directional(self, n, s, period):
        """∂²u/∂n² at arclengths s, linearly interpolated between evaluable probes."""
        n = np.asarray(n, float)
        d2 = self.uxx * n[0] ** 2 + 2 * self.uxy * n[0] * n[1] + self.uyy * n[1] ** 2
        good = self.evaluable
        sk = self.arclength[good]
        vk = d2[good]
        return np.interp(np.mod(s, period), np.concatenate([sk, [sk[0] + period]]),
                         np.concatenate([vk, [vk[0]]]))


def boundary_hessian(domain, grid, u, m, radius=FIT_RADIUS, degree=2, trace=None):
    """Hessian at m arclength-equispaced boundary points.

    Each probe fits a polynomial (quadratic by default) through the zero
    boundary values along the arc within `radius`·h, the zero values at arm
    intersections, and interior node values, all within `radius`·h.

    Since u vanishes on the boundary, the equation gives Δu = -f(0) there;
    passing `trace=-f(0)` imposes it on the fit. A trace-constrained cubic is
    accurate to O(h²) where the plain quadratic is first order.
    """
    m = check_count(m, "m", "analysis", "boundary_hessian", minimum=8)
    if degree not in (2, 3):
        raise ValidationError("analysis", "boundary_hessian", f"degree must be 2 or 3, got {degree}")
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    h = grid.h
    pts, nrm, s = boundary_sample(domain, m)
    c = domain.center
    bx = (pts[:, 0] - c[0]) / h - grid.k0[0]
    by = (pts[:, 1] - c[1]) / h - grid.k0[1]
    X, Y, V, W = _window_data(grid, values, np.rint(bx).astype(int), np.rint(by).astype(int), bx, by, radius)
    # zero data along the boundary arc
    n_arc = int(2 * radius)
    ds = np.arange(-n_arc, n_arc + 1) * (h / 2)
    arc_pts, _ = domain.boundary_point((s[:, None] + ds[None, :]).ravel())
    AX = ((arc_pts[:, 0] - c[0]) / h - grid.k0[0]).reshape(m, -1) - bx[:, None]
    AY = ((arc_pts[:, 1] - c[1]) / h - grid.k0[1]).reshape(m, -1) - by[:, None]
    AW = (AX**2 + AY**2 <= radius * radius + 1e-9).astype(float)
    X = np.concatenate([X, AX], axis=1)
    Y = np.concatenate([Y, AY], axis=1)
    V = np.concatenate([V, np.zeros_like(AX)], axis=1)
    W = np.concatenate([W, AW], axis=1)
    uxx, uxy, uyy, _, _, ok = _batched_fit(X / radius, Y / radius, V, W, degree, radius * h, trace)
    return BoundaryHessian(s, pts, nrm, uxx, uxy, uyy, ok)


def peak_hessian(grid, u):
    """Sub-grid maximiser x0 of u and the Hessian there, from a 3x3 quadratic fit."""
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    k = int(np.argmax(values))
    U = grid.full_array(values)
    i, j = grid.ix[k], grid.iy[k]
    patch = U[j - 1:j + 2, i - 1:i + 2]
    if patch.shape != (3, 3) or not np.all(np.isfinite(patch)):
        raise ValidationError("analysis", "peak_hessian", "maximum is adjacent to the boundary")
    dy, dx = np.mgrid[-1:2, -1:2]
    B = _monomials(dx.ravel().astype(float), dy.ravel().astype(float), 2)
    coef, *_ = np.linalg.lstsq(B, patch.ravel(), rcond=None)
    h = grid.h
    H = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    g = coef[1:3]
    try:
        shift = np.linalg.solve(H, -g)
    except np.linalg.LinAlgError:
        shift = np.zeros(2)
    if np.max(np.abs(shift)) > 1.0:
        shift = np.zeros(2)
    x0 = grid.points[k] + h * shift
    return x0, H / h**2


@dataclass
class ConcavityReport:
    boundary_nsd: bool
    interior_nsd: bool
    boundary_strict: bool
    max_lambda_interior: float
    interior_witness: tuple
    max_lambda_boundary: float
    boundary_witness_arclength: float
    lambda_max_at_peak: float
    peak_point: tuple
    tol_interior: float
    tol_boundary: float
    n_interior_evaluated: int = 0
    n_boundary_evaluated: int = 0
    n_boundary_failed: int = 0
    boundary_witnesses: list = field(default_factory=list)
    transform: str = "identity"
    verdict: str = "concavity"

    def to_dict(self):
        d = dict(self.__dict__)
        d["interior_witness"] = list(self.interior_witness)
        d["peak_point"] = list(self.peak_point)
        d["boundary_witnesses"] = [list(w) for w in self.boundary_witnesses]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["interior_witness"] = tuple(d["interior_witness"])
        d["peak_point"] = tuple(d["peak_point"])
        d["boundary_witnesses"] = [tuple(w) for w in d.get("boundary_witnesses", [])]
        return cls(**d)


def default_tolerances(grid, u, f=None):
    """(τ_int, τ_bdy) = (5 h, 20 h) · ||f(u)||_inf."""
    f = constant(1.0) if f is None else f
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    scale = float(np.max(np.abs(eval_f(f, np.maximum(values, 0.0)))))
    return 5 * grid.h * scale, 20 * grid.h * scale


def concavity_report(domain, grid, u, f=None, tolerances=None, m=256, hess=None, bhess=None):
    """Boundary and interior negative-semi-definiteness verdicts with witnesses."""
    tol_int, tol_bdy = default_tolerances(grid, u, f) if tolerances is None else tolerances
    hess = hessian_field(grid, u) if hess is None else hess
    bhess = boundary_hessian(domain, grid, u, m) if bhess is None else bhess

    lam = np.where(hess.evaluable, hess.lam_max, -np.inf)
    k = int(np.argmax(lam))
    blam = np.where(bhess.evaluable, bhess.lam_max, -np.inf)
    kb = int(np.argmax(blam))
    x0, H0 = peak_hessian(grid, u)
    bad = np.nonzero(bhess.evaluable & (bhess.lam_max > tol_bdy))[0]
    witnesses = [(float(bhess.arclength[i]), float(bhess.points[i, 0]), float(bhess.points[i, 1]),
                  float(bhess.lam_max[i])) for i in bad]
    return ConcavityReport(
        boundary_nsd=bool(np.all(blam[bhess.evaluable] <= tol_bdy)),
        interior_nsd=bool(np.all(lam[hess.evaluable] <= tol_int)),
        boundary_strict=bool(np.all(blam[bhess.evaluable] < -tol_bdy)),
        max_lambda_interior=float(lam[k]),
        interior_witness=tuple(grid.points[k].tolist()),
        max_lambda_boundary=float(blam[kb]),
        boundary_witness_arclength=float(bhess.arclength[kb]),
        lambda_max_at_peak=float(eig2(H0[0, 0], H0[0, 1], H0[1, 1])[1]),
        peak_point=tuple(x0.tolist()),
        tol_interior=float(tol_int),
        tol_boundary=float(tol_bdy),
        n_interior_evaluated=int(hess.evaluable.sum()),
        n_boundary_evaluated=int(bhess.evaluable.sum()),
        n_boundary_failed=int((~bhess.evaluable).sum()),
        boundary_witnesses=witnesses,
    )


def _apply_transform(values, transform):
    if transform == "sqrt":
        return np.sqrt(values), "sqrt"
    if transform == "log":
        return np.log(values), "log"
    if isinstance(transform, (tuple, list)) and len(transform) == 2 and transform[0] == "power":
        alpha = float(transform[1])
        return values**alpha, f"power({alpha:g})"
    raise ValidationError("analysis", "transform_concavity", f"unknown transform {transform!r}")


def transform_concavity(grid, u, transform, f=None, tolerances=None):
    """Interior verdict for T(u) on nodes with u >= 10 τ_int.

    sqrt is tested for convexity (λ_min >= -τ); power and log for concavity
    (λ_max <= τ).
    """
    tol_int, tol_bdy = default_tolerances(grid, u, f) if tolerances is None else tolerances
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    sel = values >= 10 * tol_int
    if np.any(values[sel] <= 0):
        raise ValidationError("analysis", "transform_concavity", "non-positive values in the evaluation set")
    tv = np.full_like(values, np.nan)
    tv[sel], name = _apply_transform(values[sel], transform)
    hess = hessian_field(grid, tv)
    # only centred stencils: the constrained fits assume zero boundary data
    use = sel & hess.centered & np.isfinite(hess.uxx) & np.isfinite(hess.uxy) & np.isfinite(hess.uyy)
    convex = name == "sqrt"
    if convex:
        score = np.where(use, -hess.lam_min, -np.inf)
        passes = bool(np.all(hess.lam_min[use] >= -tol_int))
    else:
        score = np.where(use, hess.lam_max, -np.inf)
        passes = bool(np.all(hess.lam_max[use] <= tol_int))
    k = int(np.argmax(score)) if np.any(use) else 0
    extreme = float(hess.lam_min[k] if convex else hess.lam_max[k]) if np.any(use) else float("nan")
    return ConcavityReport(
        boundary_nsd=True,
        interior_nsd=passes,
        boundary_strict=True,
        max_lambda_interior=extreme,
        interior_witness=tuple(grid.points[k].tolist()),
        max_lambda_boundary=float("nan"),
        boundary_witness_arclength=float("nan"),
        lambda_max_at_peak=float("nan"),
        peak_point=(float("nan"), float("nan")),
        tol_interior=float(tol_int),
        tol_boundary=float(tol_bdy),
        n_interior_evaluated=int(use.sum()),
        transform=name,
        verdict="convexity" if convex else "concavity",
    )


def eccentricity_sweep(aspects, h, f=None, width=1.0):
    """λ_max(D²u(x0)) at the maximiser for rounded rectangles of given aspect ratios.

    Returns (rows, fit): rows are (aspect, λ_max, log|λ_max|) sorted by aspect,
    fit holds the least-squares slope, intercept and R² of log|λ_max| on aspect.
    """
    f = constant(1.0) if f is None else f
    rows = []
    for aspect in aspects:
        if not aspect >= 1:
            raise ValidationError("analysis", "eccentricity_sweep", f"aspect must be >= 1, got {aspect}")
        dom = make_domain(DomainSpec("rounded-rectangle", {"length": aspect * width, "width": width}))
        grid = build_grid(dom, h)
        rep = solve_semilinear(grid, f)
        _, H = peak_hessian(grid, rep.field)
        lam = float(eig2(H[0, 0], H[0, 1], H[1, 1])[1])
        rows.append((float(aspect), lam, math.log(abs(lam)) if lam != 0 else float("-inf")))
    rows.sort(key=lambda r: r[0])
    return rows, fit_log_linear(rows)


def fit_log_linear(rows):
    a = np.array([r[0] for r in rows])
    y = np.array([r[2] for r in rows])
    if len(a) < 2 or not np.all(np.isfinite(y)):
        return {"slope": float("nan"), "intercept": float("nan"), "r_squared": float("nan")}
    slope, icpt = np.polyfit(a, y, 1)
    resid = y - (slope * a + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(icpt), "r_squared": r2}
