"""Independent reference machinery: interval arithmetic, a bisection paver,
a grid plus Gauss-Newton variety sampler and coverage reports.

Nothing here depends on the semidefinite relaxations, so it can be used to
check them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box, SemialgebraicSystem
from .poly import Polynomial

_INF = math.inf


def _down(v):
    return np.nextafter(v, -_INF)


def _up(v):
    return np.nextafter(v, _INF)


@dataclass(frozen=True)
class IntervalValue:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def __add__(self, other):
        other = _as_interval(other)
        return IntervalValue(float(_down(self.lo + other.lo)), float(_up(self.hi + other.hi)))

    __radd__ = __add__

    def __neg__(self):
        return IntervalValue(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_as_interval(other))

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        other = _as_interval(other)
        lo, hi = _imul(np.array(self.lo), np.array(self.hi), np.array(other.lo), np.array(other.hi))
        return IntervalValue(float(lo), float(hi))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        lo, hi = _ipow(np.array(self.lo), np.array(self.hi), k)
        return IntervalValue(float(lo), float(hi))


def _as_interval(v) -> IntervalValue:
    if isinstance(v, IntervalValue):
        return v
    return IntervalValue(float(v), float(v))


def _imul(al, ah, bl, bh):
    p = np.stack([al * bl, al * bh, ah * bl, ah * bh])
    # 0 * inf never arises: all inputs are finite
    return _down(p.min(axis=0)), _up(p.max(axis=0))


def _ipow(lo, hi, k: int):
    """Outward-rounded [lo, hi]^k, elementwise."""
    if k == 0:
        return np.ones_like(lo), np.ones_like(hi)
    if k % 2 == 1:
        # odd powers are monotone
        mlo = _mag_pow(np.abs(lo), k, up=lo < 0)
        mhi = _mag_pow(np.abs(hi), k, up=hi > 0)
        return np.where(lo < 0, -mlo, mlo), np.where(hi < 0, -mhi, mhi)
    a = np.abs(lo)
    b = np.abs(hi)
    small = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(a, b))
    big = np.maximum(a, b)
    return _mag_pow(small, k, up=False), _mag_pow(big, k, up=True)


def _mag_pow(m, k: int, up):
    """m^k for m >= 0, rounded up where ``up`` is True and down elsewhere."""
    up = np.broadcast_to(up, np.shape(m))
    out = m.copy()
    for _ in range(k - 1):
        prod = out * m
        out = np.where(up, _up(prod), _down(prod))
    return np.maximum(out, 0.0)


def interval_evaluate_many(p: Polynomial, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Natural interval extension of ``p`` over a stack of boxes (rows of lo/hi)."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    exps, coefs = p.arrays()
    tot_lo = np.zeros(len(lo))
    tot_hi = np.zeros(len(lo))
    cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for ex, c in zip(exps, coefs):
        tl = np.full(len(lo), c)
        th = np.full(len(lo), c)
        for j, k in enumerate(ex):
            if k == 0:
                continue
            key = (j, int(k))
            if key not in cache:
                cache[key] = _ipow(lo[:, j], hi[:, j], int(k))
            pl, ph = cache[key]
            tl, th = _imul(tl, th, pl, ph)
        tot_lo = _down(tot_lo + tl)
        tot_hi = _up(tot_hi + th)
    return tot_lo, tot_hi


def interval_evaluate(p: Polynomial, b: Box) -> IntervalValue:
    if p.n != b.n:
        raise ValueError(f"polynomial has {p.n} variables but box has {b.n}")
    lo, hi = interval_evaluate_many(p, np.array([b.lo]), np.array([b.hi]))
    return IntervalValue(float(lo[0]), float(hi[0]))


def excluded_mask(sys: SemialgebraicSystem, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """True for boxes proven to miss the variety by an interval sign test."""
    lo = np.atleast_2d(lo)
    out = np.zeros(len(lo), dtype=bool)
    for h in sys.equalities:
        a, b = interval_evaluate_many(h, lo, hi)
        out |= (a > 0) | (b < 0)
    for f in sys.inequalities:
        a, b = interval_evaluate_many(f, lo, hi)
        out |= b < 0
    return out


def interval_excludes(sys: SemialgebraicSystem, b: Box) -> bool:
    return bool(excluded_mask(sys, np.array([b.lo]), np.array([b.hi]))[0])


class BudgetExceeded(RuntimeError):
    pass


def _bisect(lo: np.ndarray, hi: np.ndarray):
    j = np.argmax(hi - lo, axis=1)
    rows = np.arange(len(lo))
    mid = 0.5 * (lo[rows, j] + hi[rows, j])
    lo2 = lo.copy()
    hi1 = hi.copy()
    hi1[rows, j] = mid
    lo2[rows, j] = mid
    return np.concatenate([lo, lo2]), np.concatenate([hi1, hi])


def pave(sys: SemialgebraicSystem, b: Box, rho: float, budget: int = 1_000_000) -> list[Box]:
    """Outer covering of the variety inside ``b`` by boxes of side <= rho.

    A box is discarded only when interval evaluation proves some equality
    nonzero or some inequality negative on it.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if sys.n != b.n:
        raise ValueError("system and box dimensions differ")
    lo = np.array([b.lo])
    hi = np.array([b.hi])
    done_lo, done_hi = [], []
    seen = 0
    while len(lo):
        seen += len(lo)
        if seen > budget:
            raise BudgetExceeded(f"paver exceeded {budget} boxes")
        keep = ~excluded_mask(sys, lo, hi)
        lo, hi = lo[keep], hi[keep]
        small = (hi - lo).max(axis=1) <= rho
        done_lo.append(lo[small])
        done_hi.append(hi[small])
        lo, hi = lo[~small], hi[~small]
        if len(lo):
            lo, hi = _bisect(lo, hi)
    if not done_lo:
        return []
    L = np.concatenate(done_lo)
    H = np.concatenate(done_hi)
    order = np.lexsort(np.hstack([L, H]).T[::-1])
    return [Box(tuple(L[i]), tuple(H[i])) for i in order]


# Newton machinery


def _jacobian_many(grads: list[list[Polynomial]], X: np.ndarray) -> np.ndarray:
    return np.stack([np.stack([g.evaluate_many(X) for g in row], axis=-1) for row in grads], axis=1)


def _residual_scale(eqs: Sequence[Polynomial], X: np.ndarray) -> np.ndarray:
    return np.stack([np.maximum(1.0, h.term_magnitude(X)) for h in eqs], axis=-1)


def _gauss_newton(eqs: Sequence[Polynomial], X: np.ndarray, iters: int, tol: float):
    """Batched minimum-norm Gauss-Newton. Returns (points, converged mask)."""
    grads = [h.gradient() for h in eqs]
    X = X.copy()
    conv = np.zeros(len(X), dtype=bool)
    for _ in range(iters):
        R = np.stack([h.evaluate_many(X) for h in eqs], axis=-1)
        scale = _residual_scale(eqs, X)
        # polish well past the acceptance level so reported residuals have headroom
        conv = np.all(np.abs(R) <= 1e-3 * tol * scale, axis=1)
        active = ~conv & np.all(np.isfinite(X), axis=1)
        if not active.any():
            break
        J = _jacobian_many(grads, X[active])
        step = -np.einsum("pnk,pk->pn", np.linalg.pinv(J, rcond=1e-12), R[active])
        # damp steps that would jump far relative to the point scale
        norm = np.linalg.norm(step, axis=1)
        cap = 1.0 + np.linalg.norm(X[active], axis=1)
        step *= np.minimum(1.0, cap / np.maximum(norm, 1e-300))[:, None]
        X[active] += step
    R = np.stack([h.evaluate_many(X) for h in eqs], axis=-1)
    conv = np.all(np.isfinite(X), axis=1) & np.all(np.abs(R) <= tol * _residual_scale(eqs, X), axis=1)
    return X, conv


def newton_refine(
    equalities: Sequence[Polynomial], seed: Sequence[float], max_iters: int = 50, tol: float = 1e-10
) -> np.ndarray | None:
    """Damped Gauss-Newton onto {h = 0}; the point if its residual reaches ``tol``, else None."""
    x = np.array(seed, dtype=float)
    if not equalities:
        return x
    grads = [h.gradient() for h in equalities]
    for _ in range(max_iters + 1):
        r = np.array([h.evaluate(x) for h in equalities])
        if np.all(np.abs(r) <= tol * np.maximum(1.0, [h.term_magnitude(x[None])[0] for h in equalities])):
            return x
        J = np.array([[g.evaluate(x) for g in row] for row in grads])
        if not np.all(np.isfinite(J)) or np.linalg.norm(J) == 0.0:
            return None
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        # backtracking on the residual norm
        t = 1.0
        base = float(np.linalg.norm(r))
        while t > 1e-4:
            cand = x + t * step
            rc = np.array([h.evaluate(cand) for h in equalities])
            if np.linalg.norm(rc) < base:
                break
            t *= 0.5
        else:
            return None
        x = cand
    return None


def _grid_centers(b: Box, per_dim: int) -> np.ndarray:
    axes = [a + (np.arange(per_dim) + 0.5) * (c - a) / per_dim for a, c in zip(b.lo, b.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _dedupe(points: np.ndarray, radius: float) -> np.ndarray:
    if len(points) == 0 or radius <= 0:
        return points
    cells = np.floor(points / radius).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    kept: list[int] = []
    buckets: dict[tuple, list[int]] = {}
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * points.shape[1], indexing="ij")).reshape(points.shape[1], -1).T
    for i in order:
        c = cells[i]
        clash = False
        for off in offsets:
            for j in buckets.get(tuple(c + off), ()):
                if np.linalg.norm(points[i] - points[j]) < radius:
                    clash = True
                    break
            if clash:
                break
        if not clash:
            kept.append(i)
            buckets.setdefault(tuple(c), []).append(i)
    return points[np.sort(kept)]


def sample_variety(
    sys: SemialgebraicSystem,
    b: Box,
    count: int,
    cells_per_dim: int = 64,
    max_cells: int = 1_000_000,
    tol: float = 1e-10,
) -> np.ndarray:
    """Up to ``count`` points on the variety inside ``b``, as an (N, n) array.

    Grid cells that pass the interval sign test seed a batched Gauss-Newton
    iteration; converged points inside the box and satisfying the
    inequalities are kept and thinned to a minimum spacing. The grid is
    refined until enough points are found or the cell cap is reached.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = sys.n
    if not sys.equalities:
        raise ValueError("sampling needs at least one equality")
    per_dim = max(2, min(cells_per_dim, int(max_cells ** (1.0 / n))))
    found = np.zeros((0, n))
    while True:
        C = _grid_centers(b, per_dim)
        half = 0.5 * b.widths / per_dim
        keep = ~excluded_mask(sys, C - half, C + half)
        seeds = C[keep]
        pts = np.zeros((0, n))
        for start in range(0, len(seeds), 20000):
            X, conv = _gauss_newton(sys.equalities, seeds[start : start + 20000], 40, tol)
            pts = np.vstack([pts, X[conv]])
        inside = np.all((pts >= np.array(b.lo)) & (pts <= np.array(b.hi)), axis=1)
        pts = pts[inside]
        for f in sys.inequalities:
            pts = pts[f.evaluate_many(pts) >= -1e-9] if len(pts) else pts
        found = np.vstack([found, pts])
        spacing = b.longest_side / (10.0 * per_dim)
        found = _dedupe(found, spacing)
        if len(found) >= count or per_dim ** n * 2**n > max_cells:
            break
        per_dim *= 2
    if len(found) > count:
        idx = np.linspace(0, len(found) - 1, count).round().astype(int)
        found = found[idx]
    return found


@dataclass
class CoverageReport:
    total_samples: int
    covered: int
    missed: int
    missed_points: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.missed == 0

    def __str__(self):
        return f"samples={self.total_samples} covered={self.covered} missed={self.missed}"


def verify_enclosure(points, boxes: Sequence[Box], inflation: float = 0.0) -> CoverageReport:
    if inflation < 0:
        raise ValueError("inflation must be >= 0")
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return CoverageReport(0, 0, 0, [])
    P = np.atleast_2d(P)
    if not boxes:
        return CoverageReport(len(P), 0, len(P), [tuple(p) for p in P])
    L = np.array([bx.lo for bx in boxes]) - inflation
    H = np.array([bx.hi for bx in boxes]) + inflation
    hit = np.zeros(len(P), dtype=bool)
    for s in range(0, len(P), 256):
        chunk = P[s : s + 256, None, :]
        inside = np.all((chunk >= L[None]) & (chunk <= H[None]), axis=2)
        hit[s : s + 256] = inside.any(axis=1)
    missed = [tuple(float(v) for v in p) for p in P[~hit]]
    return CoverageReport(len(P), int(hit.sum()), len(missed), missed)


def write_samples_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for p in np.atleast_2d(np.asarray(points, dtype=float)):
            if p.size:
                w.writerow([repr(float(v)) for v in p])


def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    return np.array(rows)
