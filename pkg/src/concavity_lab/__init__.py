"""Numerical laboratory for concavity and rearrangement properties of
solutions of -Δu = f(u) with zero Dirichlet data on planar domains."""

from .errors import ConcavityLabError, EstimationError, SolverError, TheoremCheckFailure, ValidationError
from .geometry import Domain, DomainSpec, GeometryStats, boundary_sample, geometry_stats, make_domain, sdf
from .nonlinearity import CATALOG, ConditionReport, Nonlinearity, check_condition, eval_f, threshold
from .fdsolver import Field, Grid, SolveReport, build_grid, solve_linear_poisson, solve_semilinear, torsion
from .radial import RadialSolution, exit_time_bound, solve_radial
from .analysis import (ConcavityReport, HessianField, boundary_hessian, concavity_report, eccentricity_sweep,
                       hessian_field, transform_concavity)
from .stochastic import (Estimate, RepresentationCheck, WalkConfig, brownian_unit_tests, estimate_exit_time,
                         estimate_harmonic_integral, estimate_occupation, verify_representation, wos_exit)
from .rearrange import RearrangedProfile, rearrange_field, talenti_compare, theorem2_experiment
from .estimators import RadialProfile, SemilinearPoissonSolver, SymmetricRearrangement, WalkOnSpheres

__version__ = "0.1.0"
