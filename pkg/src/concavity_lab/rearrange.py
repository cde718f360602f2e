"""Symmetric decreasing rearrangement of grid fields and the ball comparisons.

Every interior node carries the area h². Sorting node values in decreasing
order and stacking these cells as concentric annuli gives u* as a step
function of the radius, which is then resampled onto a uniform radial mesh by
exact cell averages.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np

from .errors import ValidationError
from .fdsolver import Field, build_grid, solve_semilinear
from .nonlinearity import check_condition, eval_f
from .radial import equal_measure_radius, outer_integral, solve_radial


@dataclass(frozen=True, eq=False)
class RearrangedProfile:
    radii: np.ndarray
    values: np.ndarray
    cell_measure: float
    step_radii: np.ndarray
    step_values: np.ndarray

    @property
    def R(self):
        return float(self.radii[-1])

    def __call__(self, r):
        """Step-function value at radius r (the exact rearrangement)."""
        k = np.searchsorted(self.step_radii, np.asarray(r, float), side="left")
        return np.where(k < len(self.step_values), self.step_values[np.minimum(k, len(self.step_values) - 1)], 0.0)

    def measure_above(self, t):
        """Area of {u* > t}."""
        return float(np.count_nonzero(self.step_values > t)) * self.cell_measure

    def integral(self):
        """∫ u* dA over the ball, exact for the step data."""
        return float(np.sum(self.step_values) * self.cell_measure)

    def annulus_masses(self, g, r):
        """∫ over the annuli [r_j, r_j+1] of g(u*) dA, exactly for the step data."""
        r = np.asarray(r, float)
        vals = g(self.step_values)
        cum = np.concatenate([[0.0], np.cumsum(vals) * self.cell_measure])
        # area enclosed at radius r is π r²; cells are whole units of area
        pos = np.pi * r * r / self.cell_measure
        k = np.minimum(np.floor(pos).astype(int), len(vals))
        frac = np.where(k < len(vals), pos - k, 0.0)
        last = np.where(k < len(vals), vals[np.minimum(k, len(vals) - 1)], 0.0)
        return cum[k] + frac * self.cell_measure * last


def rearrange_field(grid, u, n_radial=None, area=None):
    """u* on the disk of the domain's area about the origin.

    The stacked cells fill the disk of area N h² (N interior nodes); u* is zero
    between that radius and R* = sqrt(|Ω|/π), and steps beyond R* are dropped.
    """
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    if np.any(values < 0) or np.any(~np.isfinite(values)):
        raise ValidationError("rearrange", "rearrange_field", "values must be finite and >= 0")
    area = grid.domain.stats().area if area is None else float(area)
    cell = grid.h * grid.h
    sorted_vals = np.sort(values)[::-1]
    n = len(sorted_vals)
    step_r = np.sqrt(np.arange(1, n + 1) * cell / np.pi)
    R = math.sqrt(area / math.pi)
    # mesh spacing at most h keeps the first annulus inside the top cell
    n_radial = max(int(math.ceil(R / grid.h)) + 1, 2) if n_radial is None else int(n_radial)
    radii = np.linspace(0.0, R, n_radial)
    # conservative resampling: average of the step function over each annulus
    # between mesh midpoints, from the cumulative mass
    ext = np.append(sorted_vals, 0.0)
    cum = np.concatenate([[0.0], np.cumsum(sorted_vals) * cell])
    mids = np.concatenate([[0.0], 0.5 * (radii[1:] + radii[:-1]), [R]])
    pos = np.pi * mids**2 / cell
    k = np.minimum(np.floor(pos).astype(int), n)
    mass = cum[k] + (pos - k) * cell * ext[k]
    avg = np.diff(mass) / np.diff(np.pi * mids**2)
    # rounding can break monotonicity between equal-valued annuli
    avg = np.minimum.accumulate(avg)
    if pos[1] <= 1.0:
        avg[0] = sorted_vals[0]
    return RearrangedProfile(radii, avg, cell, step_r, sorted_vals)


@dataclass
class TalentiReport:
    u_star: RearrangedProfile
    v: np.ndarray
    r: np.ndarray
    min_gap: float
    argmin_r: float
    h: float

    def to_dict(self):
        return {"min_gap": self.min_gap, "argmin_r": self.argmin_r, "h": self.h,
                "R_star": self.u_star.R, "tolerance": 5 * self.h**2}


def _talenti(grid, u, f, n_nodes=4096):
    prof = rearrange_field(grid, u)
    R = prof.R
    r = np.linspace(0.0, R, n_nodes)
    # I(r) = ∫_0^r t f(u*)(t) dt = (1/2π) × mass of f(u*) inside radius r
    inner = prof.annulus_masses(lambda t: eval_f(f, t), r) / (2 * np.pi)
    v, _ = outer_integral(r, inner, 2)
    gap = v - prof(r)
    k = int(np.argmin(gap))
    return TalentiReport(prof, v, r, float(gap[k]), float(r[k]), grid.h)


def talenti_compare(domain, f, h, report=None):
    """Solve -Δv = (f(u))* on the equal-area disk and compare v with u*."""
    grid = build_grid(domain, h) if report is None else report.field.grid
    rep = solve_semilinear(grid, f) if report is None else report
    return _talenti(grid, rep.field, f)


@dataclass
class Theorem2Report:
    max_u: float
    max_psi: float
    tolerance: float
    condition: object
    profile_ok: bool
    max_profile_excess: float
    certified: bool
    exploratory: bool

    @property
    def passes(self):
        return self.max_u <= self.max_psi + self.tolerance

    def to_dict(self):
        return {"max_u": self.max_u, "max_psi": self.max_psi, "tolerance": self.tolerance,
                "pass": self.passes, "condition": self.condition.to_dict(), "profile_ok": self.profile_ok,
                "max_profile_excess": self.max_profile_excess, "certified": self.certified,
                "exploratory": self.exploratory}


def theorem2_experiment(domain, f, h, report=None):
    """max u over Ω against max ψ on the equal-area disk.

    Returns the report together with the rearranged profile and the radial
    solution used, for profile output.
    """
    cond = check_condition(f, domain.stats(), 2, "T2")
    grid = build_grid(domain, h) if report is None else report.field.grid
    rep = solve_semilinear(grid, f) if report is None else report
    R = equal_measure_radius(domain.stats().area, 2)
    psi = solve_radial(f, R, 2)
    # radial quadrature error estimated against a mesh twice as fine
    fine = solve_radial(f, R, 2, n_nodes=2 * len(psi.r_nodes))
    quad_err = abs(psi.values[0] - fine.values[0])
    tol = 5 * h * h + quad_err
    prof = rearrange_field(grid, rep.field)
    inside = prof.step_radii <= R
    excess = float(np.max(prof.step_values[inside] - psi(prof.step_radii[inside])))
    out = Theorem2Report(rep.field.max(), float(psi.values[0]), tol, cond, excess <= tol, excess,
                         rep.certified, not cond.passes)
    return out, prof, psi


def write_profiles_csv(path, prof, psi=None, v=None, v_r=None):
    """CSV columns r, u_star, psi, v on the profile's radial mesh."""
    r = prof.radii
    psi_v = psi(r) if psi is not None else np.full(len(r), np.nan)
    v_v = np.interp(r, v_r, v) if v is not None else np.full(len(r), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "u_star", "psi", "v"])
        for row in zip(r, prof.values, psi_v, v_v):
            w.writerow([f"{x:.17g}" for x in row])


def read_profiles_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name]) for name in data.dtype.names}
