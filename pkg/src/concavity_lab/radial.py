"""Radial solutions of -Δu = f(u) on the ball of radius R in R^n.

u(r) = ∫_r^R s^(1-n) ∫_0^s t^(n-1) f(u(t)) dt ds, iterated to a fixed point.
The inner integral treats the weight t^(n-1) exactly against a piecewise-linear
source, and the outer one is a trapezoid rule, so constant sources are
reproduced to rounding in every dimension.
"""

from dataclasses import dataclass
import csv

import numpy as np

from ._validation import check_count, check_positive
from .errors import SolverError, ValidationError
from .nonlinearity import eval_f, unit_ball_volume


@dataclass(frozen=True, eq=False)
class RadialSolution:
    n: int
    R: float
    r_nodes: np.ndarray
    values: np.ndarray
    derivative_at_R: float
    iterations: int = 0

    def __call__(self, r):
        return np.interp(np.abs(r), self.r_nodes, self.values, right=0.0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value"])
            for r, v in zip(self.r_nodes, self.values):
                w.writerow([f"{r:.17g}", f"{v:.17g}"])

    @classmethod
    def read_csv(cls, path, n=2):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        r, v = data[:, 0], data[:, 1]
        slope = (v[-1] - v[-2]) / (r[-1] - r[-2])
        return cls(n, float(r[-1]), r, v, float(slope))


def inner_moments(r, g, n):
    """I(r_j) = ∫_0^{r_j} t^(n-1) g(t) dt for g linear on each mesh cell."""
    a, b = r[:-1], r[1:]
    slope = np.diff(g) / np.diff(r)
    icpt = g[:-1] - slope * a
    cell = icpt * (b**n - a**n) / n + slope * (b ** (n + 1) - a ** (n + 1)) / (n + 1)
    return np.concatenate([[0.0], np.cumsum(cell)])


def outer_integral(r, inner, n):
    """u(r_j) = ∫_{r_j}^R s^(1-n) I(s) ds by the trapezoid rule, plus u'(R)."""
    w = np.zeros_like(r)
    w[1:] = inner[1:] / r[1:] ** (n - 1)
    cells = 0.5 * (w[1:] + w[:-1]) * np.diff(r)
    u = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    return u, -w[-1]


def solve_radial_linear(source, R, n=2, n_nodes=4096):
    """Solve -Δv = g(|x|) on the ball for a fixed radial source.

    `source` is either a callable of r or an array sampled on the mesh.
    """
    R = check_positive(R, "R", "radial", "solve_radial")
    r = np.linspace(0.0, R, n_nodes)
    g = source(r) if callable(source) else np.asarray(source, float)
    u, du = outer_integral(r, inner_moments(r, g, n), n)
    return RadialSolution(n, R, r, u, du, 1)


def solve_radial(f, R, n=2, tol=1e-12, n_nodes=4096, max_iters=10_000):
    """Picard iteration for the radial semilinear problem from u = 0."""
    R = check_positive(R, "R", "radial", "solve_radial")
    n = check_count(n, "n", "radial", "solve_radial")
    n_nodes = check_count(n_nodes, "n_nodes", "radial", "solve_radial", minimum=4096)
    tol = check_positive(tol, "tol", "radial", "solve_radial")
    if not f.is_positive:
        raise ValidationError("radial", "solve_radial", f"nonlinearity {f} is not positive on [0, inf)")
    r = np.linspace(0.0, R, n_nodes)
    u = np.zeros(n_nodes)
    for it in range(1, max_iters + 1):
        new, du = outer_integral(r, inner_moments(r, eval_f(f, np.maximum(u, 0.0)), n), n)
        if not np.all(np.isfinite(new)):
            raise SolverError("radial", "solve_radial", f"non-finite iterate at step {it}")
        update = np.max(np.abs(new - u))
        u = new
        if update <= tol:
            return RadialSolution(n, R, r, u, du, it)
    raise SolverError("radial", "solve_radial", f"no convergence in {max_iters} iterations (update {update:.3e})")


def radial_max(sol):
    return float(sol.values[0])


def exit_time_bound(stats, n=2):
    """Upper bound |Ω|^(2/n) / (n ω_n^(2/n)) on the expected Brownian lifetime."""
    area = stats.area if hasattr(stats, "area") else float(stats)
    if not area > 0:
        raise ValidationError("radial", "exit_time_bound", "area must be positive")
    return area ** (2 / n) / (n * unit_ball_volume(n) ** (2 / n))


def equal_measure_radius(area, n=2):
    return (area / unit_ball_volume(n)) ** (1 / n)
