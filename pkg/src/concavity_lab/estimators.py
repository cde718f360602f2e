"""scikit-learn style wrappers around the functional API.

Hyper-parameters go to the constructor and are exposed through get_params;
fitted state lives in trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis, nonlinearity, rearrange, stochastic
from .errors import ValidationError
from .fdsolver import Field, build_grid, solve_semilinear
from .geometry import Domain, DomainSpec, make_domain
from .interpolation import GridInterpolator
from .radial import solve_radial


def _domain(spec):
    if isinstance(spec, Domain):
        return spec
    if isinstance(spec, (DomainSpec, dict)):
        return make_domain(spec)
    raise ValidationError("estimators", "fit", f"domain must be a Domain, DomainSpec or dict, got {type(spec).__name__}")


def _nonlinearity(f):
    if f is None:
        return nonlinearity.constant(1.0)
    if isinstance(f, nonlinearity.Nonlinearity):
        return f
    if isinstance(f, dict):
        return nonlinearity.Nonlinearity.from_dict(f)
    raise ValidationError("estimators", "fit", f"f must be a Nonlinearity or dict, got {type(f).__name__}")


def _points(X):
    return check_array(X, dtype=np.float64, ensure_min_features=2, ensure_all_finite=True)


class SemilinearPoissonSolver(BaseEstimator):
    """Grid solution of -Δu = f(u), u = 0 on the boundary.

    ``fit()`` solves; ``predict(X)`` interpolates u at points (zero outside
    the domain, NaN where the lattice cannot be interpolated).
    """

    def __init__(self, domain=None, f=None, h=1 / 64, tol=1e-10):
        self.domain = domain
        self.f = f
        self.h = h
        self.tol = tol

    def fit(self, X=None, y=None):
        self.domain_ = _domain(self.domain)
        self.f_ = _nonlinearity(self.f)
        self.grid_ = build_grid(self.domain_, self.h)
        self.report_ = solve_semilinear(self.grid_, self.f_, tol=self.tol)
        self.field_ = self.report_.field
        self._interp = GridInterpolator(self.grid_, self.field_.values, boundary_value=0.0)
        return self

    def predict(self, X):
        check_is_fitted(self, "field_")
        X = _points(X)
        vals, ok = self._interp(X)
        inside = self.domain_.sdf(X) < 0
        return np.where(inside, np.where(ok, vals, np.nan), 0.0)

    def concavity_report(self, m=256):
        check_is_fitted(self, "field_")
        return analysis.concavity_report(self.domain_, self.grid_, self.field_, self.f_, m=m)


class RadialProfile(BaseEstimator):
    """Radial solution on the ball of radius R in R^n; ``predict`` takes radii."""

    def __init__(self, f=None, R=1.0, n=2, n_nodes=4096):
        self.f = f
        self.R = R
        self.n = n
        self.n_nodes = n_nodes

    def fit(self, X=None, y=None):
        self.solution_ = solve_radial(_nonlinearity(self.f), self.R, self.n, n_nodes=self.n_nodes)
        return self

    def predict(self, r):
        check_is_fitted(self, "solution_")
        r = check_array(np.asarray(r, float).reshape(-1, 1), ensure_all_finite=True)[:, 0]
        return self.solution_(r)


class WalkOnSpheres(BaseEstimator):
    """Monte Carlo exit-time (``quantity='exit_time'``) or occupation
    (``quantity='occupation'`` with ``integrand``) estimates at query points."""

    def __init__(self, domain=None, quantity="exit_time", integrand=None, n_walks=100_000,
                 eps_shell=None, seed=0, workers=None):
        self.domain = domain
        self.quantity = quantity
        self.integrand = integrand
        self.n_walks = n_walks
        self.eps_shell = eps_shell
        self.seed = seed
        self.workers = workers

    def fit(self, X=None, y=None):
        if self.quantity not in ("exit_time", "occupation"):
            raise ValidationError("estimators", "fit", f"unknown quantity {self.quantity!r}")
        if self.quantity == "occupation" and self.integrand is None:
            raise ValidationError("estimators", "fit", "occupation estimates need an integrand")
        self.domain_ = _domain(self.domain)
        self.config_ = stochastic.WalkConfig(n_walks=self.n_walks, eps_shell=self.eps_shell,
                                             seed=self.seed, workers=self.workers)
        return self

    def estimate(self, X):
        """List of Estimate objects, one per row of X."""
        check_is_fitted(self, "config_")
        out = []
        for x in _points(X):
            if self.quantity == "exit_time":
                out.append(stochastic.estimate_exit_time(self.domain_, x, self.config_))
            else:
                out.append(stochastic.estimate_occupation(self.domain_, x, self.integrand, self.config_))
        return out

    def predict(self, X):
        est = self.estimate(X)
        self.std_errors_ = np.array([e.std_error for e in est])
        return np.array([e.mean for e in est])


class SymmetricRearrangement(TransformerMixin, BaseEstimator):
    """Maps a grid Field to its symmetric decreasing rearrangement sampled on
    a uniform radial mesh of ``n_radial`` nodes (default: spacing <= h)."""

    def __init__(self, n_radial=None):
        self.n_radial = n_radial

    def fit(self, X, y=None):
        if not isinstance(X, Field):
            raise ValidationError("estimators", "fit", "SymmetricRearrangement expects a Field")
        self.profile_ = rearrange.rearrange_field(X.grid, X, self.n_radial)
        self.radii_ = self.profile_.radii
        return self

    def transform(self, X):
        if not isinstance(X, Field):
            raise ValidationError("estimators", "transform", "SymmetricRearrangement expects a Field")
        return rearrange.rearrange_field(X.grid, X, self.n_radial).values
