import itertools

import numpy as np
import pytest

import sdp_cases
from boxroad import sdp
from boxroad.sdp import BlockSDP, MalformedSDPError, SDPStatus


@pytest.mark.parametrize("case", sdp_cases.KNOWN, ids=lambda f: f.__name__)
def test_known_optimum(case):
    prog, known = case()
    sol = sdp.solve(prog, tol=1e-8)
    assert sol.status is SDPStatus.OPTIMAL
    assert abs(sol.primal_objective - known) <= 1e-6 * (1 + abs(known))
    assert abs(sol.dual_objective - known) <= 1e-6 * (1 + abs(known))
    # weak duality in maximization form
    assert sol.dual_objective >= sol.primal_objective - 1e-8 * (1 + abs(known))
    # a certified dual value is an upper bound on the maximum, up to the margin
    assert sol.certified_dual_bound is not None
    assert sol.certified_dual_bound >= known - 1e-8 * (1 + abs(known))


@pytest.mark.parametrize("case", sdp_cases.INFEASIBLE, ids=lambda f: f.__name__)
def test_infeasible_constructions(case):
    prog = case()
    sol = sdp.solve(prog)
    assert sol.status is SDPStatus.PRIMAL_INFEASIBLE
    y = np.asarray(sol.ray)
    # Farkas certificate: A^T y >= 0 and a^T y < 0
    assert prog.a @ y < 0
    assert sdp.verify_psd(prog.adjoint(y), sdp.default_margin(prog))


def test_unbounded_primal_is_dual_infeasible():
    E = np.array([[0.0, 0.5], [0.5, 0.0]])
    prog = BlockSDP((2,), (np.diag([1.0, 0.0]),), (E[None],), [0.0])
    assert sdp.solve(prog).status is SDPStatus.DUAL_INFEASIBLE


def test_certify_dual_bound_examples():
    prog, _ = sdp_cases.eig_trace()
    assert sdp.certify_dual_bound(prog, np.array([-1.0])) == -1.0
    # slack diag(-2, -1) is indefinite
    assert sdp.certify_dual_bound(prog, np.array([-3.0])) is None
    with pytest.raises(ValueError):
        sdp.certify_dual_bound(prog, np.array([1.0, 2.0]))


def _grid_block(C, steps=81):
    """max tr(C X) over 2x2 PSD X with trace 1, by parameterizing X."""
    best = -np.inf
    for a in np.linspace(0, 1, steps):
        r = np.sqrt(a * (1 - a))
        for b in np.linspace(-r, r, steps):
            best = max(best, C[0, 0] * a + C[1, 1] * (1 - a) + 2 * C[0, 1] * b)
    return best


def test_random_three_block_against_grid():
    rng = np.random.default_rng(11)
    for _ in range(3):
        Cs = []
        for _ in range(3):
            B = rng.normal(size=(2, 2))
            Cs.append(B + B.T)
        A = []
        for k in range(3):
            stack = np.zeros((3, 2, 2))
            stack[k] = np.eye(2)
            A.append(stack)
        prog = BlockSDP((2, 2, 2), tuple(Cs), tuple(A), [1.0, 1.0, 1.0])
        sol = sdp.solve(prog)
        grid = sum(_grid_block(C) for C in Cs)
        assert sol.certified_dual_bound is not None
        assert sol.certified_dual_bound >= grid - 1e-9
        assert sol.certified_dual_bound <= grid + 1e-2


def test_primal_certificate_is_a_lower_bound():
    # min over dual-feasible y of a^T y equals the known optimum
    for case in sdp_cases.KNOWN:
        prog, known = case()
        sol = sdp.solve(prog, dual_bounds=np.full(prog.m, 1e3), certify=False)
        assert sol.certified_primal_bound is not None
        assert sol.certified_primal_bound <= known + 1e-9 * (1 + abs(known))
        assert sol.certified_primal_bound >= known - 1e-5 * (1 + abs(known))


def test_certify_primal_bound_rejects_indefinite():
    prog, _ = sdp_cases.eig_trace()
    assert sdp.certify_primal_bound(prog, [np.diag([1.0, -0.1])], np.ones(1)) is None
    assert sdp.certify_primal_bound(prog, [np.diag([1.0, 0.0])], np.ones(1)) == -1.0


def test_deterministic_iterates():
    prog, _ = sdp_cases.theta_c5()
    a = sdp.solve(prog)
    b = sdp.solve(prog)
    assert a.history == b.history
    assert np.array_equal(a.y, b.y)


def test_dependent_consistent_rows_are_dropped():
    prog, known = sdp_cases.eig_trace()
    doubled = BlockSDP(prog.block_sizes, prog.C, (np.concatenate([prog.A[0], 2 * prog.A[0]]),), [1.0, 2.0])
    sol = sdp.solve(doubled)
    assert sol.status is SDPStatus.OPTIMAL
    assert abs(sol.primal_objective - known) <= 1e-6
    assert sol.y.shape == (2,)


def test_malformed_inputs():
    with pytest.raises(MalformedSDPError):
        BlockSDP((2,), (np.eye(2),), (np.eye(3)[None],), [1.0])
    with pytest.raises(MalformedSDPError):
        BlockSDP((2,), (np.array([[0.0, 1.0], [0.0, 0.0]]),), (np.eye(2)[None],), [1.0])
    with pytest.raises(MalformedSDPError):
        BlockSDP((2,), (np.eye(2),), (np.array([[[1.0, 1.0], [0.0, 1.0]]]),), [1.0])
    with pytest.raises(MalformedSDPError):
        BlockSDP((2,), (np.eye(2),), (np.zeros((0, 2, 2)),), [])
    with pytest.raises(MalformedSDPError):
        BlockSDP((0,), (np.eye(0),), (np.zeros((1, 0, 0)),), [1.0])
    prog, _ = sdp_cases.eig_trace()
    with pytest.raises(ValueError):
        sdp.solve(prog, tol=0.0)


def test_sparse_dump_round_trip(tmp_path):
    prog, _ = sdp_cases.two_block_eig()
    path = tmp_path / "prog.txt"
    sdp.write_sparse(prog, path)
    back = sdp.read_sparse(path)
    assert back.block_sizes == prog.block_sizes
    assert np.array_equal(back.a, prog.a)
    for x, y in itertools.chain(zip(back.C, prog.C), zip(back.A, prog.A)):
        assert np.array_equal(x, y)
    lines = path.read_text().splitlines()
    assert lines[1] == "2 3"
    assert all(len(ln.split()) == 5 for ln in lines[3:])
