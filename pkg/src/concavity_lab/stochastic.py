"""Walk-on-spheres Monte Carlo for exit distributions and occupation functionals.

Brownian motion here has generator ½Δ, so the expected time spent in a ball of
radius ρ when started at its centre is ρ²/n and u(x) = 𝔼 ½∫₀^τ f(u(ω_x(s))) ds.

All walks in a run are advanced together in fixed-size blocks. Each walk draws
from its own counter-based stream and the per-walk results are reduced in
walk-index order, so estimates do not depend on the number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import csv
import logging
import math
import os

import numpy as np
from scipy import integrate, special, stats as sps

from ._validation import check_count, check_point, check_unit_vector
from .errors import EstimationError, ValidationError
from .analysis import default_tolerances
from .fdsolver import Field, SolveReport
from .interpolation import GridInterpolator
from .nonlinearity import eval_f
from .rng import MAX_DRAWS, uniforms

log = logging.getLogger(__name__)

BLOCK = 8192
DRAWS_PER_STEP = 3
MAX_DISCARD_RATE = 0.01
WORKERS_ENV = "CONCAVITY_LAB_WORKERS"
DIM = 2


@dataclass(frozen=True)
class WalkConfig:
    n_walks: int = 100_000
    eps_shell: float | None = None
    max_steps: int = 1_000_000
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        check_count(self.n_walks, "n_walks", "stochastic", "WalkConfig", minimum=2)
        check_count(self.max_steps, "max_steps", "stochastic", "WalkConfig")
        if self.max_steps * DRAWS_PER_STEP > MAX_DRAWS:
            raise ValidationError("stochastic", "WalkConfig",
                                  f"max_steps must be <= {MAX_DRAWS // DRAWS_PER_STEP}, got {self.max_steps}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValidationError("stochastic", "WalkConfig", f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.workers is not None:
            check_count(self.workers, "workers", "stochastic", "WalkConfig")

    def shell(self, domain):
        """The absorption distance for this domain, validated against its inradius."""
        st = domain.stats()
        eps = 1e-4 * st.diameter if self.eps_shell is None else float(self.eps_shell)
        if not 0 < eps <= st.inradius / 10:
            raise ValidationError("stochastic", "WalkConfig",
                                  f"eps_shell must lie in (0, inradius/10 = {st.inradius / 10:g}], got {eps:g}")
        return eps

    def n_workers(self):
        if self.workers is not None:
            return int(self.workers)
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ValidationError("stochastic", "WalkConfig", f"{WORKERS_ENV} must be an integer, got {env!r}")
            if value >= 1:
                return value
        return 1

    def to_dict(self):
        return {"n_walks": self.n_walks, "eps_shell": self.eps_shell, "max_steps": self.max_steps,
                "seed": int(self.seed), "workers": self.workers}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"n_walks", "eps_shell", "max_steps", "seed", "workers"}
        if unknown:
            raise ValidationError("stochastic", "WalkConfig", f"unknown walk keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_walks: int
    seed: int
    n_discarded: int = 0

    def within(self, target, k=3.0, slack=0.0):
        return abs(self.mean - target) <= k * self.std_error + slack

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _estimate(samples, seed, n_discarded=0):
    samples = np.asarray(samples, float)
    n = len(samples)
    if n < 2:
        raise EstimationError("stochastic", "estimate", "fewer than two usable walks")
    return Estimate(float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(n)), n, int(seed), int(n_discarded))


def green_radius(u):
    """Radius fraction s in (0, 1) with s²(1 - 2 ln s) = u.

    This inverts the radial CDF of the normalized Green's density of the unit
    disk (density proportional to r ln(1/r)).
    """
    w = np.real(special.lambertw(-np.asarray(u, float) / math.e, k=-1))
    return np.sqrt(np.exp(1.0 + w))


@dataclass
class WalkBatch:
    """Per-walk results of one run, in walk-index order."""
    exit_time: np.ndarray
    occupation: np.ndarray
    occupation_ok: np.ndarray
    exit_points: np.ndarray
    exit_arclength: np.ndarray
    n_steps: np.ndarray
    discarded: np.ndarray

    @property
    def kept(self):
        return ~self.discarded

    @property
    def discard_rate(self):
        return float(self.discarded.mean())


def _run_block(domain, x, cfg, eps, integrand, start, count):
    walks = np.arange(start, start + count, dtype=np.uint64)
    pos = np.tile(np.asarray(x, float), (count, 1))
    active = np.ones(count, bool)
    n_steps = np.zeros(count, np.int64)
    exit_time = np.zeros(count)
    occ_walk, occ_pts, occ_w = [], [], []
    step = 0
    while step < cfg.max_steps:
        idx = np.nonzero(active)[0]
        if not len(idx):
            break
        rho = -domain.sdf(pos[idx])
        done = rho <= eps
        active[idx[done]] = False
        idx, rho = idx[~done], rho[~done]
        if not len(idx):
            break
        exit_time[idx] += rho * rho / DIM
        base = DRAWS_PER_STEP * step
        if integrand is not None:
            s = green_radius(uniforms(cfg.seed, walks[idx], base + 1))
            phi = 2 * math.pi * uniforms(cfg.seed, walks[idx], base + 2)
            occ_walk.append(idx)
            occ_pts.append(pos[idx] + (rho * s)[:, None] * np.column_stack([np.cos(phi), np.sin(phi)]))
            occ_w.append(0.5 * rho * rho / DIM)
        theta = 2 * math.pi * uniforms(cfg.seed, walks[idx], base)
        pos[idx] += rho[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
        n_steps[idx] += 1
        step += 1
    discarded = active.copy()

    occupation = np.zeros(count)
    occ_ok = np.ones(count, bool)
    if integrand is not None and occ_walk:
        wk = np.concatenate(occ_walk)
        vals, ok = integrand(np.concatenate(occ_pts))
        contrib = np.where(ok, np.concatenate(occ_w) * np.where(ok, vals, 0.0), 0.0)
        occupation = np.bincount(wk, weights=contrib, minlength=count)
        occ_ok = np.bincount(wk, weights=(~ok).astype(float), minlength=count) == 0

    exit_pts = np.full((count, 2), np.nan)
    exit_s = np.full(count, np.nan)
    keep = ~discarded
    if np.any(keep):
        exit_pts[keep], exit_s[keep] = domain.closest_point(pos[keep])
    return WalkBatch(exit_time, occupation, occ_ok, exit_pts, exit_s, n_steps, discarded)


def run_walks(domain, x, cfg, integrand=None):
    """Run cfg.n_walks walks from x; `integrand` maps (k, 2) points to (values, ok)."""
    x = check_point(x, "stochastic", "wos_exit", "x")
    eps = cfg.shell(domain)
    if not domain.sdf(x[None, :])[0] < -eps:
        raise ValidationError("stochastic", "wos_exit", f"start point {x.tolist()} is within eps_shell of the boundary")
    starts = list(range(0, cfg.n_walks, BLOCK))
    sizes = [min(BLOCK, cfg.n_walks - s) for s in starts]

    def job(args):
        return _run_block(domain, x, cfg, eps, integrand, *args)

    workers = cfg.n_workers()
    if workers == 1 or len(starts) == 1:
        parts = [job(a) for a in zip(starts, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, zip(starts, sizes)))
    batch = WalkBatch(*[np.concatenate([getattr(p, name) for p in parts])
                        for name in WalkBatch.__dataclass_fields__])
    log.debug("ran %d walks from %s: mean steps %.1f, discarded %d",
              cfg.n_walks, x.tolist(), batch.n_steps.mean(), batch.discarded.sum())
    return batch


def _check_discards(batch, operation, extra=None):
    bad = batch.discarded if extra is None else (batch.discarded | extra)
    rate = float(bad.mean())
    if rate > MAX_DISCARD_RATE:
        raise EstimationError("stochastic", operation,
                              f"discard rate {rate:.2%} exceeds {MAX_DISCARD_RATE:.0%}")
    return ~bad, int(bad.sum())


def wos_exit(domain, x, cfg=None, walk=0):
    """Single walk: (projected exit point, list of (centre, radius) sphere steps)."""
    cfg = WalkConfig(n_walks=2, seed=0) if cfg is None else cfg
    x = check_point(x, "stochastic", "wos_exit", "x")
    eps = cfg.shell(domain)
    if not domain.sdf(x[None, :])[0] < -eps:
        raise ValidationError("stochastic", "wos_exit", f"start point {x.tolist()} is within eps_shell of the boundary")
    pos = x.copy()
    spheres = []
    for step in range(cfg.max_steps):
        rho = float(-domain.sdf(pos[None, :])[0])
        if rho <= eps:
            q, _ = domain.closest_point(pos[None, :])
            return q[0], spheres
        spheres.append((tuple(pos.tolist()), rho))
        theta = 2 * math.pi * float(uniforms(cfg.seed, walk, DRAWS_PER_STEP * step))
        pos = pos + rho * np.array([math.cos(theta), math.sin(theta)])
    raise EstimationError("stochastic", "wos_exit", f"walk exceeded max_steps={cfg.max_steps}")


def estimate_harmonic_integral(domain, x, g, cfg):
    """∫ g dω_x: the mean of g over walk exit points."""
    batch = run_walks(domain, x, cfg)
    keep, nd = _check_discards(batch, "estimate_harmonic_integral")
    vals = np.asarray(g(batch.exit_points[keep]), float)
    return _estimate(vals, cfg.seed, nd)


def estimate_exit_time(domain, x, cfg):
    """𝔼 τ from the exact per-sphere conditional means ρ²/n."""
    batch = run_walks(domain, x, cfg)
    keep, nd = _check_discards(batch, "estimate_exit_time")
    return _estimate(batch.exit_time[keep], cfg.seed, nd)


def as_integrand(F):
    """Wrap a Field, a scalar, or a callable of points as points -> (values, ok)."""
    if isinstance(F, Field):
        interp = GridInterpolator(F.grid, F.values)
        return interp
    if isinstance(F, (int, float)):
        c = float(F)
        return lambda p: (np.full(len(p), c), np.ones(len(p), bool))
    if callable(F):
        def wrapped(p):
            out = F(p)
            if isinstance(out, tuple):
                return out
            out = np.asarray(out, float)
            return out, np.isfinite(out)
        return wrapped
    raise ValidationError("stochastic", "estimate_occupation", f"unsupported integrand {type(F).__name__}")


def estimate_occupation(domain, x, F, cfg):
    """𝔼 ½∫₀^τ F(ω_x(s)) ds with one Green's-density sample per sphere."""
    batch = run_walks(domain, x, cfg, as_integrand(F))
    if not np.all(batch.occupation_ok[batch.kept]):
        raise EstimationError("stochastic", "estimate_occupation", "integrand not evaluable at a sampled point")
    keep, nd = _check_discards(batch, "estimate_occupation")
    return _estimate(batch.occupation[keep], cfg.seed, nd)


@dataclass
class RepresentationCheck:
    x: tuple
    direction: tuple
    lhs: float
    rhs_occupation: Estimate
    rhs_boundary: Estimate
    rhs_total: float
    std_error: float
    z_score: float
    n_discarded: int = 0
    boundary_weak: bool = True
    boundary_strict: bool = False

    def to_dict(self):
        d = dict(self.__dict__)
        d["x"] = list(self.x)
        d["direction"] = list(self.direction)
        d["rhs_occupation"] = self.rhs_occupation.to_dict()
        d["rhs_boundary"] = self.rhs_boundary.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["x"] = tuple(d["x"])
        d["direction"] = tuple(d["direction"])
        d["rhs_occupation"] = Estimate.from_dict(d["rhs_occupation"])
        d["rhs_boundary"] = Estimate.from_dict(d["rhs_boundary"])
        return cls(**d)


# z-scores use at least this standard error, relative to max(1, |lhs|); some
# checks have zero Monte Carlo variance and agree to rounding only
Z_FLOOR = 1e-9


def verify_representation(domain, f, u, hess, x, direction, cfg, bhess, tolerance=None):
    """Compare ∂²u/∂n²(x) on the grid with its stochastic representation.

    Both right-hand terms come from the same walks: the occupation term
    integrates f''(u)(∂_n u)² + f'(u) ∂²_n u along them, and the boundary
    term averages the boundary Hessian ∂²_n u at their exit points. The weak
    (λ_max <= τ) and strict (λ_max < -τ) boundary verdicts use τ = τ_bdy
    unless `tolerance` is given.
    """
    n = check_unit_vector(direction, "stochastic", "verify_representation")
    x = check_point(x, "stochastic", "verify_representation", "x")
    field_u = u.field if isinstance(u, SolveReport) else u
    grid = field_u.grid
    d1, d2 = hess.directional(n)
    iu = GridInterpolator(grid, field_u.values, boundary_value=0.0)
    i1 = GridInterpolator(grid, d1, hess.evaluable)
    i2 = GridInterpolator(grid, d2, hess.evaluable)

    def integrand(p):
        uv, ok0 = iu(p)
        a, ok1 = i1(p)
        b, ok2 = i2(p)
        ok = ok0 & ok1 & ok2
        t = np.where(ok, np.maximum(uv, 0.0), 0.0)
        val = eval_f(f, t, 2) * np.where(ok, a, 0.0) ** 2 + eval_f(f, t, 1) * np.where(ok, b, 0.0)
        return val, ok

    lhs_v, lhs_ok = i2(x[None, :])
    if not lhs_ok[0]:
        raise EstimationError("stochastic", "verify_representation", f"Hessian not evaluable at {x.tolist()}")
    lhs = float(lhs_v[0])

    batch = run_walks(domain, x, cfg, integrand)
    keep, nd = _check_discards(batch, "verify_representation", ~batch.occupation_ok)
    period = domain.boundary_length
    g = bhess.directional(n, batch.exit_arclength[keep], period)
    occ = batch.occupation[keep]
    e_occ = _estimate(occ, cfg.seed, nd)
    e_bdy = _estimate(g, cfg.seed, nd)
    total = _estimate(occ + g, cfg.seed, nd)
    rhs = e_occ.mean + e_bdy.mean
    se = max(total.std_error, Z_FLOOR * max(1.0, abs(lhs)))
    tol = default_tolerances(grid, field_u, f)[1] if tolerance is None else float(tolerance)
    blam = bhess.lam_max[bhess.evaluable]
    return RepresentationCheck(
        tuple(x.tolist()), tuple(n.tolist()), lhs, e_occ, e_bdy, rhs, total.std_error,
        (lhs - rhs) / se, nd, bool(np.all(blam <= tol)), bool(np.all(blam < -tol)))


def exit_histogram(domain, x, cfg, bins=36):
    """(bin_start_arclength, counts) of exit points over equal arclength bins."""
    bins = check_count(bins, "bins", "stochastic", "exit_histogram")
    batch = run_walks(domain, x, cfg)
    keep, _ = _check_discards(batch, "exit_histogram")
    L = domain.boundary_length
    edges = np.linspace(0.0, L, bins + 1)
    counts, _ = np.histogram(np.mod(batch.exit_arclength[keep], L), bins=edges)
    return edges[:-1], counts


def write_histogram_csv(path, starts, counts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_start_arclength", "count"])
        for s, c in zip(starts, counts):
            w.writerow([f"{s:.17g}", int(c)])


def poisson_kernel_bins(x, R, bins):
    """Exact harmonic-measure mass of equal angular bins on the disk of radius R about 0."""
    r = math.hypot(*x)
    phi0 = math.atan2(x[1], x[0])
    edges = np.linspace(0.0, 2 * math.pi, bins + 1)
    rho = r / R

    def kern(t):
        return (1 - rho**2) / (2 * math.pi * (1 - 2 * rho * math.cos(t - phi0) + rho**2))

    return np.array([integrate.quad(kern, a, b, epsabs=1e-14, epsrel=1e-12)[0]
                     for a, b in zip(edges[:-1], edges[1:])])


def chi_square_pvalue(counts, probs):
    """Pearson chi-square p-value of observed counts against cell probabilities."""
    counts = np.asarray(counts, float)
    expected = counts.sum() * np.asarray(probs, float) / np.sum(probs)
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return float(sps.chi2.sf(stat, len(counts) - 1))


@dataclass
class BrownianCheck:
    name: str
    estimate: float
    std_error: float
    expected: float

    @property
    def passes(self):
        return abs(self.estimate - self.expected) <= 3 * self.std_error + 1e-12 * max(1.0, abs(self.expected))

    def to_dict(self):
        return {**self.__dict__, "passes": self.passes}


def brownian_unit_tests(cfg=None):
    """Second moment of Gaussian increments and angular averages of quadratic forms."""
    cfg = WalkConfig() if cfg is None else cfg
    n = cfg.n_walks
    k = np.arange(n, dtype=np.uint64)
    u1, u2, u3, u4 = (uniforms(cfg.seed, k, j) for j in range(4))
    # Box-Muller
    rad = np.sqrt(-2 * np.log(u1))
    g = np.column_stack([rad * np.cos(2 * math.pi * u2), rad * np.sin(2 * math.pi * u2)])
    out = []
    for t in (0.1, 1.0):
        sq = t * np.sum(g * g, axis=1)
        out.append(BrownianCheck(f"second_moment_t={t:g}", float(sq.mean()),
                                 float(sq.std(ddof=1) / math.sqrt(n)), DIM * t))
    phi = 2 * math.pi * u3
    X = np.column_stack([np.cos(phi), np.sin(phi)])
    for name, A in (("quadratic_form_diag(1,-1)", np.diag([1.0, -1.0])),
                    ("quadratic_form_identity", np.eye(2)),
                    ("quadratic_form_general", np.array([[2.0, 0.7], [0.7, -0.5]]))):
        q = np.einsum("ki,ij,kj->k", X, A, X)
        out.append(BrownianCheck(name, float(q.mean()), float(q.std(ddof=1) / math.sqrt(n)), float(np.trace(A)) / DIM))
    return out
