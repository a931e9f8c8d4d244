import math

import numpy as np
import pytest

from boxroad import lasserre, oracle
from boxroad.geometry import Box, SemialgebraicSystem
from boxroad.lasserre import RelaxationError
from boxroad.poly import Polynomial, monomial_basis, parse_expression
from conftest import XY, circle_system, clover_system, random_system


def one_dim(text):
    return SemialgebraicSystem(1, (parse_expression(text, ["x"]),))


def test_constraint_count_and_order():
    sys = SemialgebraicSystem(2, (parse_expression("x*y", XY),))
    cs = lasserre.build_constraints(sys, Box.cube(2, -1, 1))
    assert cs.c == 2 * 2 + 2 * 1 + 0 + 1 == 7
    assert len(cs.e) == 8
    assert cs.e[0] == Polynomial.constant(2, 1.0)
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    assert cs.e[1] == x + 1 and cs.e[2] == y + 1
    assert cs.e[3] == 1 - x and cs.e[4] == 1 - y
    assert cs.e[5] == sys.equalities[0] and cs.e[6] == -sys.equalities[0]
    assert cs.e[7] == cs.ball_bound - x * x - y * y


def test_ball_bound_unit_box():
    for n in (1, 2, 3):
        cs = lasserre.build_constraints(SemialgebraicSystem(n), Box.cube(n, 0, 1))
        assert cs.ball_bound == n


def test_clover_equality_pair_vanishes_at_origin():
    cs = lasserre.build_constraints(clover_system(), Box.cube(2, -2, 2))
    h, minus_h = cs.e[1 + 2 * 2], cs.e[2 + 2 * 2]
    assert h == clover_system().equalities[0]
    assert h.evaluate((0, 0)) == 0.0 and minus_h.evaluate((0, 0)) == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        lasserre.build_constraints(clover_system(), Box.cube(3, -1, 1))


def test_single_variable_blocks():
    cs = lasserre.build_constraints(SemialgebraicSystem(1), Box((0.0,), (3.0,)))
    prog = lasserre.build_relaxation(cs, 2, 0, "min")
    spec = lasserre.relaxation_spec(cs, 2, 0, "min")
    assert spec.block_degrees[1] == 0
    assert prog.block_sizes[1] == 1
    # rows are alpha = (1), (2); the alpha = 0 coefficient sits in the objective
    assert prog.A[1][0, 0, 0] == 1.0
    assert prog.A[1][1, 0, 0] == 0.0
    assert prog.C[1][0, 0] == 0.0


def test_block_sizes_box_only():
    cs = lasserre.build_constraints(SemialgebraicSystem(2), Box.cube(2, -1, 1))
    prog = lasserre.build_relaxation(cs, 4, 0)
    assert prog.block_sizes == (6, 3, 3, 3, 3, 3)


def test_degree_too_small_rejected():
    cs = lasserre.build_constraints(clover_system(), Box.cube(2, -2, 2))
    with pytest.raises(RelaxationError):
        lasserre.build_relaxation(cs, 3, 0)


def test_coefficient_reconstruction():
    rng = np.random.default_rng(5)
    sys = SemialgebraicSystem(2, (parse_expression("x^2*y - y + 0.3", XY),), (parse_expression("1 - x*y", XY),))
    cs = lasserre.build_constraints(sys, Box((-1.0, -0.5), (2.0, 1.5)))
    d = 5
    prog = lasserre.build_relaxation(cs, d, 0)
    spec = lasserre.relaxation_spec(cs, d, 0)
    rows = spec.basis
    for j, p in enumerate(cs.e):
        B = monomial_basis(2, spec.block_degrees[j])
        A = np.concatenate([-prog.C[j][None], prog.A[j]])
        for _ in range(20):
            x = rng.uniform(-2, 2, size=2)
            mono = np.array([np.prod(x ** np.array(a)) for a in rows])
            lhs = np.tensordot(mono, A, axes=1)
            v = np.array([np.prod(x ** np.array(b)) for b in B])
            rhs = np.outer(v, v) * p.evaluate(x)
            scale = 1.0 + np.abs(rhs).max()
            assert np.abs(lhs - rhs).max() <= 1e-9 * scale


def test_bound_two_points():
    sys = one_dim("x^2 - 1")
    b2 = lasserre.bound(sys, Box((-2.0,), (2.0,)), 2, 0, "min")
    assert b2.bound <= -1.0
    b4 = lasserre.bound(sys, Box((-2.0,), (2.0,)), 4, 0, "min")
    assert -1 - 1e-4 <= b4.bound <= -1.0


def test_bound_box_only():
    box = Box((-0.7, 0.2), (1.3, 0.9))
    sol = lasserre.bound(SemialgebraicSystem(2), box, 2, 0, "min")
    assert abs(sol.bound + 0.7) <= 1e-6 and sol.bound <= -0.7
    sol = lasserre.bound(SemialgebraicSystem(2), box, 2, 1, "max")
    assert abs(sol.bound - 0.9) <= 1e-6 and sol.bound >= 0.9


def test_bound_circle_box_converges():
    box = Box.cube(2, 0.5, 1.5)
    values = [lasserre.bound(circle_system(), box, d, 0, "min").bound for d in (2, 4, 6)]
    assert all(v <= 0.5 for v in values)
    assert abs(values[-1] - 0.5) <= 1e-6
    top = lasserre.bound(circle_system(), box, 4, 0, "max").bound
    assert math.sqrt(0.75) <= top <= math.sqrt(0.75) + 1e-4


def test_uninformative_degree_falls_back_to_edge():
    sol = lasserre.bound(clover_system(), Box.cube(2, -2, 2), 2, 0, "min")
    assert sol.bound == -2.0 and not sol.informative


def test_detect_empty_examples():
    assert lasserre.detect_empty(circle_system(), Box.cube(2, 2, 3), 2)
    assert not lasserre.detect_empty(circle_system(), Box.cube(2, 0, 1), 2)
    assert lasserre.detect_empty(clover_system(), Box.cube(2, 1.5, 2), 5)


def test_extract_minimizer_examples():
    sol = lasserre.bound(one_dim("x^2 - 1"), Box((0.0,), (2.0,)), 4, 0, "min")
    p = lasserre.extract_minimizer(sol)
    assert p is not None and abs(p[0] - 1.0) <= 1e-6

    sol = lasserre.bound(circle_system(), Box.cube(2, 0.5, 1.5), 4, 0, "min")
    p = lasserre.extract_minimizer(sol)
    assert p is not None and np.allclose(p, [0.5, math.sqrt(0.75)], atol=1e-4)

    # two symmetric minimizers (+-1, -1): the moment matrix is not rank one
    sys = SemialgebraicSystem(2, (parse_expression("x^2 - 1", XY),))
    sol = lasserre.bound(sys, Box((-2.0, -1.0), (2.0, 1.0)), 4, 1, "min")
    assert lasserre.extract_minimizer(sol) is None


def test_soundness_on_random_systems():
    rng = np.random.default_rng(21)
    for _ in range(6):
        n = int(rng.integers(1, 3))
        sys, _ = random_system(rng, n)
        box = Box.cube(n, -2, 2)
        pts = oracle.sample_variety(sys, box, 200)
        for i in range(n):
            lo = lasserre.bound(sys, box, 4, i, "min").bound
            hi = lasserre.bound(sys, box, 4, i, "max").bound
            if len(pts):
                assert pts[:, i].min() >= lo - 1e-6
                assert pts[:, i].max() <= hi + 1e-6


def test_ball_constraint_holds_at_variety_points():
    rng = np.random.default_rng(3)
    for _ in range(5):
        sys, _ = random_system(rng, 2)
        box = Box.cube(2, -2, 2)
        cs = lasserre.build_constraints(sys, box)
        pts = oracle.sample_variety(sys, box, 100)
        for p in pts:
            assert cs.e[-1].evaluate(p) >= 0


def test_detect_empty_no_false_positive_on_circle_tiles():
    sys = circle_system()
    pts = oracle.sample_variety(sys, Box.cube(2, -2, 2), 400)
    edges = np.linspace(-2, 2, 9)
    for a, b in zip(edges[:-1], edges[1:]):
        for c, d in zip(edges[:-1], edges[1:]):
            tile = Box((a, c), (b, d))
            if any(tile.contains(p) for p in pts):
                assert not lasserre.detect_empty(sys, tile, 2)
