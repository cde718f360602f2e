import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concavity_lab import (DomainSpec, Field, ValidationError, build_grid, make_domain, rearrange_field,
                           solve_semilinear, talenti_compare, theorem2_experiment, torsion)
from concavity_lab.nonlinearity import CATALOG, affine, check_condition, constant
from concavity_lab.rearrange import read_profiles_csv, write_profiles_csv

from conftest import ELLIPSE, RECTANGLE


def test_radial_field_is_its_own_rearrangement(disk_grid64, disk_torsion64):
    prof = rearrange_field(disk_grid64, disk_torsion64)
    # Lipschitz constant of (1 - r²)/4 is 1/2
    err = np.abs(prof.values - (1 - prof.radii**2) / 4)
    assert np.max(err) <= 2 * disk_grid64.h * 0.5


def test_constant_field(ellipse_grid64, ellipse):
    prof = rearrange_field(ellipse_grid64, np.full(ellipse_grid64.n_interior, 3.0))
    assert prof.R == pytest.approx(math.sqrt(ellipse.stats().area / math.pi))
    # inside the stacked cells the profile is the constant
    inside = prof.radii <= prof.step_radii[-1] - ellipse_grid64.h
    np.testing.assert_allclose(prof.values[inside], 3.0, rtol=1e-13)
    np.testing.assert_array_equal(prof.step_values, 3.0)


def test_rectangle_max_and_integral(rectangle):
    g = build_grid(rectangle, 1 / 64)
    u = torsion(g)
    prof = rearrange_field(g, u)
    assert prof.values[0] == u.max() and prof.step_values[0] == u.max()
    cell = g.h**2
    assert abs(prof.integral() - np.sum(u.values) * cell) <= cell
    # resampled profile carries the same mass
    r = prof.radii
    mass = np.trapezoid(2 * np.pi * r * prof.values, r)
    assert mass == pytest.approx(prof.integral(), rel=5e-3)


def test_equimeasurability(ellipse_grid64, ellipse_affine64):
    u = ellipse_affine64.field
    prof = rearrange_field(ellipse_grid64, u)
    cell = ellipse_grid64.h**2
    for t in np.linspace(0, u.max(), 20):
        assert abs(prof.measure_above(t) - np.count_nonzero(u.values > t) * cell) <= cell
        # and via the step radii: the disk {u* > t} has area π r²
        k = np.count_nonzero(prof.step_values > t)
        r = prof.step_radii[k - 1] if k else 0.0
        assert abs(math.pi * r * r - np.count_nonzero(u.values > t) * cell) <= cell * (1 + 1e-9)


def test_profile_non_increasing(ellipse_grid64, ellipse_affine64):
    prof = rearrange_field(ellipse_grid64, ellipse_affine64.field)
    assert np.all(np.diff(prof.values) <= 0)
    assert np.all(np.diff(prof.step_values) <= 0)


def test_negative_values_rejected(disk_grid64):
    with pytest.raises(ValidationError):
        rearrange_field(disk_grid64, -np.ones(disk_grid64.n_interior))


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_rearrangement_monotone(seed):
    g = _grid()
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 1, g.n_interior)
    w = u + rng.uniform(0, 0.5, g.n_interior)
    pu, pw = rearrange_field(g, u), rearrange_field(g, w)
    assert np.all(pu.values <= pw.values + 1e-12)
    r = np.linspace(0, pu.R, 300)
    assert np.all(pu(r) <= pw(r))


_G = {}


def _grid():
    if not _G:
        _G["g"] = build_grid(make_domain(ELLIPSE), 1 / 16)
    return _G["g"]


def test_talenti_on_disk_is_equality(disk):
    rep = talenti_compare(disk, constant(), 1 / 64)
    assert abs(rep.min_gap) <= 5 / 64**2


@pytest.mark.parametrize("spec, f", [(RECTANGLE, constant()), (ELLIPSE, affine(1.0, 0.3))], ids=["rect", "ellipse"])
def test_talenti_inequality(spec, f):
    rep = talenti_compare(make_domain(spec), f, 1 / 64)
    assert rep.min_gap >= -5 / 64**2


def test_theorem2_disk_equality(disk):
    rep, prof, psi = theorem2_experiment(disk, affine(1.0, 0.3), 1 / 64)
    assert rep.passes and not rep.exploratory
    assert abs(rep.max_u - rep.max_psi) <= rep.tolerance


def test_theorem2_ellipse(ellipse):
    rep, _, _ = theorem2_experiment(ellipse, affine(1.0, 1.0), 1 / 64)
    assert rep.condition.passes and rep.passes and rep.profile_ok


def test_theorem2_long_rounded_rectangle():
    dom = make_domain(DomainSpec("rounded-rectangle", {"length": 4.0, "width": 1.0, "rho": 0.25}))
    rep, _, _ = theorem2_experiment(dom, affine(1.0, 0.5), 1 / 32)
    assert rep.condition.margin > 0 and rep.passes


def test_theorem2_exploratory_flag(ellipse):
    rep, _, _ = theorem2_experiment(ellipse, affine(1.0, 2.5), 1 / 16)
    assert rep.exploratory and not rep.condition.passes


def test_profiles_csv_round_trip(tmp_path, ellipse):
    t2, prof, psi = theorem2_experiment(ellipse, affine(1.0, 0.3), 1 / 32)
    tal = talenti_compare(ellipse, affine(1.0, 0.3), 1 / 32)
    path = tmp_path / "profiles.csv"
    write_profiles_csv(path, prof, psi, tal.v, tal.r)
    back = read_profiles_csv(path)
    np.testing.assert_array_equal(back["r"], prof.radii)
    np.testing.assert_array_equal(back["u_star"], prof.values)
    np.testing.assert_array_equal(back["psi"], psi(prof.radii))
