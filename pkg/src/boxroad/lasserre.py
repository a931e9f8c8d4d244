"""Truncated quadratic-module relaxations over a box.

For a box b and system {h = 0, f >= 0} the constraint polynomials are

    e_0 = 1, x_j - l_j, u_j - x_j, h_j, -h_j, f_j, N - sum x_j^2

and the degree-d relaxation searches for Gram matrices Q_j >= 0 with

    x_i - lambda = sum_j (v_j^T Q_j v_j) e_j,      v_j = monomials of degree <= d_j,

maximizing lambda. In block SDP form the Gram matrices are the primal X, the
coefficient-matching rows are the constraints, and the dual vector y holds
the moments of a linear functional L with L(1) = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .geometry import Box, SemialgebraicSystem
from .poly import Exponent, Polynomial, monomial_basis


class Direction(enum.Enum):
    MIN = "min"
    MAX = "max"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        return cls(str(value).lower())


class RelaxationError(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSet:
    n: int
    k: int
    m: int
    e: tuple[Polynomial, ...]
    ball_bound: int

    @property
    def c(self) -> int:
        return len(self.e) - 1

    def labels(self) -> list[str]:
        out = ["one"]
        out += [f"lower[{j}]" for j in range(self.n)]
        out += [f"upper[{j}]" for j in range(self.n)]
        out += [f"eq[{j}]" for j in range(self.k)]
        out += [f"-eq[{j}]" for j in range(self.k)]
        out += [f"ineq[{j}]" for j in range(self.m)]
        out.append("ball")
        return out


@dataclass(frozen=True)
class RelaxationSpec:
    degree: int
    block_degrees: tuple[int, ...]
    basis: tuple[Exponent, ...]
    objective_index: int
    direction: Direction

    @property
    def index(self) -> dict[Exponent, int]:
        return {a: r for r, a in enumerate(self.basis)}


@dataclass
class MomentSolution:
    """Result of one bound computation, reported in the box's own coordinates."""

    status: str
    bound: float
    direction: Direction
    variable: int
    informative: bool
    moments: dict[Exponent, float] = field(default_factory=dict)
    gram_blocks: list[np.ndarray] = field(default_factory=list, repr=False)
    moment_matrix: np.ndarray | None = field(default=None, repr=False)
    constraints: ConstraintSet | None = field(default=None, repr=False)
    center: np.ndarray | None = None
    half_width: np.ndarray | None = None
    sdp_status: sdp.SDPStatus | None = None

    @property
    def lower_bound(self) -> float:
        return self.bound


def build_constraints(system: SemialgebraicSystem, box: Box) -> ConstraintSet:
    if system.n != box.n:
        raise ValueError(f"system has {system.n} variables but box has {box.n}")
    n = system.n
    e = [Polynomial.constant(n, 1.0)]
    for j in range(n):
        e.append(Polynomial.variable(n, j) - box.lo[j])
    for j in range(n):
        e.append(box.hi[j] - Polynomial.variable(n, j))
    e.extend(system.equalities)
    e.extend(-h for h in system.equalities)
    e.extend(system.inequalities)
    N = int(math.ceil(sum(a * a + b * b for a, b in zip(box.lo, box.hi))))
    ball = Polynomial.constant(n, float(N))
    for j in range(n):
        ball = ball - Polynomial.variable(n, j) ** 2
    e.append(ball)
    return ConstraintSet(n, system.k, system.m, tuple(e), N)


def block_degrees(cs: ConstraintSet, d: int) -> tuple[int, ...]:
    need = max([p.degree for p in cs.e[1:]] + [1])
    if d < need:
        raise RelaxationError(f"relaxation degree {d} is below the largest constraint degree {need}")
    out = []
    for p in cs.e:
        w = (d - p.degree) // 2
        if w < 0:
            raise RelaxationError(f"relaxation degree {d} too small for a constraint of degree {p.degree}")
        out.append(w)
    return tuple(out)


def build_relaxation(cs: ConstraintSet, d: int, objective_var: int, direction="min") -> sdp.BlockSDP:
    prog, _ = _build(cs, d, objective_var, Direction.parse(direction))
    return prog


def relaxation_spec(cs: ConstraintSet, d: int, objective_var: int, direction="min") -> RelaxationSpec:
    return _build(cs, d, objective_var, Direction.parse(direction))[1]


def _coefficient_blocks(cs: ConstraintSet, d: int, dj: Sequence[int]):
    """Per-block stacks A[j] of shape (|E(d)|, s_j, s_j) including the alpha = 0 row."""
    n = cs.n
    basis = monomial_basis(n, d)
    radix = d + 1
    weights = radix ** np.arange(n)
    lookup = np.full(radix**n, -1, dtype=np.int64)
    lookup[np.array(basis, dtype=np.int64) @ weights] = np.arange(len(basis))
    blocks = []
    for p, w in zip(cs.e, dj):
        B = np.array(monomial_basis(n, w), dtype=np.int64)
        s = len(B)
        pair = B[:, None, :] + B[None, :, :]
        exps, coefs = p.arrays()
        A = np.zeros((len(basis), s, s))
        ii, jj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        for ex, cf in zip(exps, coefs):
            rows = lookup[(pair + ex) @ weights]
            np.add.at(A, (rows, ii, jj), cf)
        blocks.append(A)
    return basis, blocks


def _build(cs: ConstraintSet, d: int, objective_var: int, direction: Direction):
    if not 0 <= objective_var < cs.n:
        raise IndexError(f"objective variable {objective_var} out of range")
    dj = block_degrees(cs, d)
    basis, blocks = _coefficient_blocks(cs, d, dj)
    unit = tuple(1 if k == objective_var else 0 for k in range(cs.n))
    index = {a: r for r, a in enumerate(basis)}
    rhs = np.zeros(len(basis) - 1)
    rhs[index[unit] - 1] = 1.0 if direction is Direction.MIN else -1.0
    C = tuple(-A[0] for A in blocks)
    A = tuple(A[1:] for A in blocks)
    prog = sdp.BlockSDP(tuple(b.shape[1] for b in blocks), C, A, rhs)
    spec = RelaxationSpec(d, dj, tuple(basis), index[unit], direction)
    return prog, spec


def normalized(system: SemialgebraicSystem, box: Box):
    """Map ``box`` onto [-1, 1]^n and rescale each polynomial by its largest coefficient.

    Returns (constraint set on [-1,1]^n, center, half widths).
    """
    center = box.center
    half = np.maximum(0.5 * box.widths, 1e-300)

    def tr(p: Polynomial) -> Polynomial:
        q = p.compose_affine(center, half)
        s = q.max_abs_coefficient()
        return q.scale(1.0 / s) if s > 0 else q

    unit = SemialgebraicSystem(
        system.n, tuple(tr(h) for h in system.equalities), tuple(tr(f) for f in system.inequalities)
    )
    cs = build_constraints(unit, Box.cube(system.n, -1.0, 1.0))
    e = list(cs.e)
    # ball N - |t|^2 has coefficients up to N = 2n
    e[-1] = e[-1].scale(1.0 / e[-1].max_abs_coefficient())
    return ConstraintSet(cs.n, cs.k, cs.m, tuple(e), cs.ball_bound), center, half


def _edge(box: Box, i: int, direction: Direction) -> float:
    return box.lo[i] if direction is Direction.MIN else box.hi[i]


def bound(
    system: SemialgebraicSystem,
    box: Box,
    d: int,
    i: int,
    direction="min",
    tol: float = 1e-8,
) -> MomentSolution:
    """Certified outer bound on x_i over the variety inside ``box``.

    For ``min`` the returned bound never exceeds min x_i over Z cap b; for
    ``max`` it is never below the maximum. An empty Z cap b may give a bound
    past the opposite box edge but never lies outside the own edge. When
    nothing can be certified the box edge is returned and ``informative`` is
    False.
    """
    direction = Direction.parse(direction)
    cs, center, half = normalized(system, box)
    edge = _edge(box, i, direction)
    try:
        prog, spec = _build(cs, d, i, direction)
    except RelaxationError:
        return MomentSolution("Uninformative", edge, direction, i, False, center=center, half_width=half)
    # point moments on [-1,1]^n are bounded by 1 in magnitude
    sol = sdp.solve(prog, tol=tol, dual_bounds=np.ones(prog.m), certify=False)
    cert = sol.certified_primal_bound
    if cert is None:
        value, informative = edge, False
    else:
        t = cert if direction is Direction.MIN else -cert
        value = float(center[i] + half[i] * t)
        # outward rounding of the affine map
        value = float(np.nextafter(value, -math.inf if direction is Direction.MIN else math.inf))
        # the variety lies in the box, so the own edge is never beaten by solver slack
        value = max(value, edge) if direction is Direction.MIN else min(value, edge)
        informative = True
    y = np.concatenate([[1.0], sol.y])
    moments = {a: float(v) for a, v in zip(spec.basis, y)}
    M = None
    if sol.status is sdp.SDPStatus.OPTIMAL:
        M = prog.dual_slack(sol.y)[0]
    return MomentSolution(
        status=sol.status.value,
        bound=value,
        direction=direction,
        variable=i,
        informative=informative,
        moments=moments,
        gram_blocks=sol.X,
        moment_matrix=M,
        constraints=cs,
        center=center,
        half_width=half,
        sdp_status=sol.status,
    )


def detect_empty(system: SemialgebraicSystem, box: Box, d: int, tol: float = 1e-8) -> bool:
    """True only when a certificate shows the variety misses ``box``.

    Searches for Gram matrices with trace 1 whose weighted sum sum_j sigma_j e_j
    is a negative constant. Such an identity is impossible at any feasible
    point; residuals of the coefficient match are charged against the bound
    |t^alpha| <= 1 on the normalized box.
    """
    cs, _, _ = normalized(system, box)
    try:
        dj = block_degrees(cs, d)
    except RelaxationError:
        return False
    basis, blocks = _coefficient_blocks(cs, d, dj)
    sizes = tuple(b.shape[1] for b in blocks)
    C = tuple(-A[0] for A in blocks)
    A = tuple(np.concatenate([A[1:], np.eye(A.shape[1])[None]]) for A in blocks)
    rhs = np.zeros(len(basis))
    rhs[-1] = 1.0
    prog = sdp.BlockSDP(sizes, C, A, rhs)
    bounds = np.ones(prog.m)
    bounds[-1] = 0.0
    sol = sdp.solve(prog, tol=tol, dual_bounds=bounds, certify=False)
    return sol.certified_primal_bound is not None and sol.certified_primal_bound > 0.0


def newton_polish(equalities: Sequence[Polynomial], x0: np.ndarray, iters: int = 20) -> np.ndarray:
    """Minimum-norm Gauss-Newton steps toward the equality set; returns the last iterate."""
    x = np.array(x0, dtype=float)
    if not equalities:
        return x
    grads = [h.gradient() for h in equalities]
    for _ in range(iters):
        r = np.array([h.evaluate(x) for h in equalities])
        if np.max(np.abs(r)) <= 1e-14:
            break
        J = np.array([[g.evaluate(x) for g in row] for row in grads])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        x = x + step
        if np.linalg.norm(step) <= 1e-15 * (1 + np.linalg.norm(x)):
            break
    return x


def extract_minimizer(sol: MomentSolution, rank_ratio: float = 1e-2, slack: float = 1e-4) -> np.ndarray | None:
    """Candidate optimizer read from first-order moments, or None.

    The candidate is accepted when the moment matrix is close to rank one and
    the Newton-polished point satisfies every constraint to within ``slack``
    in normalized units.
    """
    if sol.moment_matrix is None or sol.constraints is None or sol.sdp_status is not sdp.SDPStatus.OPTIMAL:
        return None
    ev = np.linalg.eigvalsh(sol.moment_matrix)
    if len(ev) < 2 or ev[-1] <= 0 or ev[-2] / ev[-1] > rank_ratio:
        return None
    cs = sol.constraints
    t = np.array([sol.moments[tuple(1 if k == j else 0 for k in range(cs.n))] for j in range(cs.n)])
    eqs = cs.e[1 + 2 * cs.n : 1 + 2 * cs.n + cs.k]
    t = newton_polish(eqs, t)
    if not np.all(np.isfinite(t)):
        return None
    if any(p.evaluate(t) < -slack for p in cs.e):
        return None
    return sol.center + sol.half_width * t
