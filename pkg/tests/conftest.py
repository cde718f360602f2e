import math

import numpy as np
import pytest
from hypothesis import settings

from concavity_lab import DomainSpec, build_grid, make_domain, solve_semilinear, torsion
from concavity_lab.nonlinearity import affine

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

DISK = DomainSpec("disk", {"radius": 1.0})
ELLIPSE = DomainSpec("ellipse", {"a": 2.0, "b": 1.0})
RECTANGLE = DomainSpec("rectangle", {"length": 2.0, "width": 1.0})
TRIANGLE = DomainSpec("equilateral-triangle", {"side": 1.0})
ROUNDED = DomainSpec("rounded-rectangle", {"length": 2.0, "width": 1.0, "rho": 0.25})
STADIUM = DomainSpec("stadium", {"length": 2.0, "radius": 1.0})


def rectangle_torsion(x, y, L=2.0, W=1.0, terms=400):
    """Series solution of -Δu = 1 on [-L/2, L/2] x [-W/2, W/2], u = 0 on the walls.

    (W²/4 - y²)/2 minus the harmonic correction matching it on x = ±L/2.
    """
    x = np.abs(np.asarray(x, float))
    y = np.asarray(y, float)
    u = (W * W / 4 - y * y) / 2
    for k in range(1, 2 * terms, 2):
        a_k = 4 * W * W * (-1) ** ((k - 1) // 2) / (math.pi**3 * k**3)
        q = k * math.pi / W
        # cosh(q x) / cosh(q L/2) without overflow
        ratio = np.exp(q * (x - L / 2)) * (1 + np.exp(-2 * q * x)) / (1 + math.exp(-q * L))
        u = u - a_k * ratio * np.cos(q * y)
    return u


@pytest.fixture(scope="session")
def disk():
    return make_domain(DISK)


@pytest.fixture(scope="session")
def ellipse():
    return make_domain(ELLIPSE)


@pytest.fixture(scope="session")
def rectangle():
    return make_domain(RECTANGLE)


@pytest.fixture(scope="session")
def triangle():
    return make_domain(TRIANGLE)


@pytest.fixture(scope="session")
def disk_grid64(disk):
    return build_grid(disk, 1 / 64)


@pytest.fixture(scope="session")
def disk_torsion64(disk_grid64):
    return torsion(disk_grid64)


@pytest.fixture(scope="session")
def ellipse_grid64(ellipse):
    return build_grid(ellipse, 1 / 64)


@pytest.fixture(scope="session")
def ellipse_affine64(ellipse_grid64):
    return solve_semilinear(ellipse_grid64, affine(1.0, 0.3))


@pytest.fixture(scope="session")
def disk_affine64(disk_grid64):
    return solve_semilinear(disk_grid64, affine(1.0, 0.3))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        latest = {int(line.split()[1].rstrip(":")): line for line in ACCEPTANCE_LINES}
        for number in sorted(latest):
            terminalreporter.write_line(latest[number])
