import time

import numpy as np
import pytest

from boxroad import boxer, oracle, roadmap
from boxroad.geometry import Box, SemialgebraicSystem
from boxroad.poly import parse_expression

XY = ["x", "y"]
XYZ = ["x", "y", "z"]
CLOVER = "(x^2 + y^2)^2 - x^3 + 3*x*y^2"
TORUS = "36*(x^2 + y^2) - (5 + x^2 + y^2 + z^2)^2"
SPHERE = "x^2 + y^2 + z^2 - 1"
KLEIN = "(x^2+y^2+z^2+2*y-1)*((x^2+y^2+z^2-2*y-1)^2-8*z^2) + 16*x*z*(x^2+y^2+z^2-2*y-1)"

TORUS_EPS = 0.01


def clover_system():
    return SemialgebraicSystem(2, (parse_expression(CLOVER, XY),))


def circle_system():
    return SemialgebraicSystem(2, (parse_expression("x^2 + y^2 - 1", XY),))


def torus_poly():
    return parse_expression(TORUS, XYZ)


def sphere_poly():
    return parse_expression(SPHERE, XYZ)


@pytest.fixture(scope="session")
def clover_fine():
    """Clover enclosure at resolution 0.1 and its single-threaded wall time."""
    cfg = boxer.EnclosureConfig(resolution=0.1, degree=5)
    t0 = time.perf_counter()
    graph = boxer.enclose(clover_system(), Box.cube(2, -2, 2), cfg)
    return graph, time.perf_counter() - t0


@pytest.fixture(scope="session")
def clover_coarse():
    cfg = boxer.EnclosureConfig(resolution=0.5, degree=5)
    return boxer.enclose(clover_system(), Box.cube(2, -2, 2), cfg)


@pytest.fixture(scope="session")
def clover_samples():
    return oracle.sample_variety(clover_system(), Box.cube(2, -2, 2), 1000)


@pytest.fixture(scope="session")
def torus_roadmap():
    """Skeleton, critical boxes and slices of the torus at resolution 0.1."""
    cfg = boxer.EnclosureConfig(resolution=0.1, degree=5)
    return roadmap.full_roadmap(torus_poly(), Box.cube(3, -6, 6), cfg, TORUS_EPS)


@pytest.fixture(scope="session")
def torus_coarse_skeleton():
    cfg = boxer.EnclosureConfig(resolution=0.5, degree=5)
    sp = roadmap.SkeletonProblem(torus_poly(), TORUS_EPS, Box.cube(3, -6, 6), cfg)
    return roadmap.build_skeleton(sp)


@pytest.fixture(scope="session")
def sphere_skeleton():
    cfg = boxer.EnclosureConfig(resolution=0.1, degree=5)
    sp = roadmap.SkeletonProblem(sphere_poly(), 0.01, Box.cube(3, -2, 2), cfg)
    return roadmap.build_skeleton(sp)


def random_system(rng, n, max_degree=4, box=2.0):
    """One equality of degree <= max_degree vanishing at a random point of the box."""
    from boxroad.poly import Polynomial, monomial_basis

    deg = int(rng.integers(2, max_degree + 1))
    basis = [a for a in monomial_basis(n, deg) if sum(a) > 0]
    chosen = rng.choice(len(basis), size=min(len(basis), 4 + n), replace=False)
    terms = {basis[i]: float(rng.normal()) for i in chosen}
    p = Polynomial(n, terms)
    root = rng.uniform(-0.75 * box, 0.75 * box, size=n)
    p = p - p.evaluate(root)
    return SemialgebraicSystem(n, (p,)), root


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
