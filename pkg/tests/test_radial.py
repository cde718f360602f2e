import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concavity_lab import RadialSolution, SolverError, ValidationError, exit_time_bound, solve_radial
from concavity_lab.nonlinearity import CATALOG, affine, constant
from concavity_lab.radial import equal_measure_radius, radial_max, solve_radial_linear


def test_torsion_profile():
    sol = solve_radial(constant(1.0), 1.0, 2)
    np.testing.assert_allclose(sol.values, (1 - sol.r_nodes**2) / 4, atol=1e-12)
    assert radial_max(sol) == pytest.approx(0.25, abs=1e-12)


def test_exit_time_profile():
    # the expected lifetime from x in the unit disk is (1 - |x|²)/2
    sol = solve_radial(constant(2.0), 1.0, 2)
    assert sol.values[0] == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(sol.values, (1 - sol.r_nodes**2) / 2, atol=1e-12)


@pytest.mark.parametrize("c, R, n, want", [(2.0, 1.0, 2, 0.25 * 2), (2.0, 1.0, 3, 1 / 3), (2.0, 2.0, 2, 2.0)])
def test_radial_max_values(c, R, n, want):
    assert radial_max(solve_radial(constant(c), R, n)) == pytest.approx(want, abs=1e-12)


def test_affine_against_bessel():
    from scipy.special import j0
    sol = solve_radial(affine(1.0, 1.0), 1.0, 2)
    exact = j0(sol.r_nodes) / j0(1.0) - 1
    assert np.max(np.abs(sol.values - exact)) <= 1e-7


def test_exit_time_bound_examples():
    assert exit_time_bound(math.pi, 2) == pytest.approx(0.5, rel=1e-15)
    assert exit_time_bound(4 * math.pi, 2) == pytest.approx(2.0, rel=1e-15)
    assert exit_time_bound(1.0, 3) == pytest.approx((3 / (4 * math.pi)) ** (2 / 3) / 3, rel=1e-14)
    with pytest.raises(ValidationError):
        exit_time_bound(0.0)


def test_equal_measure_radius():
    assert equal_measure_radius(math.pi, 2) == pytest.approx(1.0)
    assert equal_measure_radius(4 * math.pi / 3 * 8, 3) == pytest.approx(2.0)


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        solve_radial(constant(), -1.0)
    with pytest.raises(ValidationError):
        solve_radial(constant(), 1.0, n=0)
    with pytest.raises(ValidationError):
        solve_radial(constant(), 1.0, n_nodes=100)
    with pytest.raises(SolverError):
        solve_radial(affine(1.0, 50.0), 1.0, 2, max_iters=20)


def test_csv_round_trip(tmp_path):
    sol = solve_radial(affine(1.0, 0.3), 1.0, 2)
    path = tmp_path / "radial.csv"
    sol.to_csv(path)
    back = RadialSolution.read_csv(path)
    np.testing.assert_array_equal(back.r_nodes, sol.r_nodes)
    np.testing.assert_array_equal(back.values, sol.values)


def test_linear_solver_with_array_source():
    r = np.linspace(0, 1, 4096)
    sol = solve_radial_linear(np.ones_like(r), 1.0, 2)
    np.testing.assert_allclose(sol.values, (1 - r**2) / 4, atol=1e-12)
    assert sol.derivative_at_R == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("f", [f for f in CATALOG if f.sup_d1 < 4], ids=lambda f: f.kind + str(f.a))
def test_ode_residual_and_monotone(f):
    sol = solve_radial(f, 1.0, 2)
    r, u = sol.r_nodes, sol.values
    dr = r[1] - r[0]
    i = np.arange(50, len(r) - 1)
    lap = (u[i + 1] - 2 * u[i] + u[i - 1]) / dr**2 + (u[i + 1] - u[i - 1]) / (2 * dr * r[i])
    assert np.max(np.abs(lap + f(u[i]))) <= 1e-6
    assert u[-1] == 0.0
    assert np.all(np.diff(u) <= 0)


@settings(max_examples=20)
@given(st.floats(0.1, 5), st.floats(0.2, 3), st.integers(1, 5))
def test_constant_source_closed_form(c, R, n):
    sol = solve_radial(constant(c), R, n)
    np.testing.assert_allclose(sol.values, c * (R * R - sol.r_nodes**2) / (2 * n), atol=1e-10 * max(1, c * R * R))
