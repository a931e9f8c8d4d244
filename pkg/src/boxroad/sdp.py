"""Block-diagonal semidefinite programming.

Programs are stated in the form

    maximize   tr(C X)
    subject to tr(A_i X) = a_i,  i = 1..m,   X block diagonal, X >= 0,

with dual

    minimize   a^T y
    subject to S(y) = sum_i y_i A_i - C >= 0.

The solver is an infeasible-start primal-dual path-following method using
Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Diagonal blocks
of equal size are stacked so each iteration issues a handful of batched
LAPACK calls regardless of the block count.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class MalformedSDPError(ValueError):
    pass


class SDPStatus(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    NUMERICAL_LIMIT = "NumericalLimit"


@dataclass(frozen=True)
class BlockSDP:
    """Data of a block-diagonal SDP.

    ``C[b]`` is the (s_b, s_b) objective block, ``A[b]`` the stacked
    (m, s_b, s_b) constraint blocks, ``a`` the (m,) right-hand side.
    """

    block_sizes: tuple[int, ...]
    C: tuple[np.ndarray, ...]
    A: tuple[np.ndarray, ...]
    a: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "C", tuple(np.asarray(c, dtype=float) for c in self.C))
        object.__setattr__(self, "A", tuple(np.asarray(a, dtype=float) for a in self.A))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        self.validate()

    @property
    def m(self) -> int:
        return len(self.a)

    @classmethod
    def from_constraints(
        cls,
        block_sizes: Sequence[int],
        objective: Sequence[np.ndarray],
        constraints: Sequence[tuple[Sequence[np.ndarray], float]],
    ) -> "BlockSDP":
        """Build from a list of (per-block matrices, rhs) pairs."""
        if not constraints:
            raise MalformedSDPError("at least one constraint is required")
        nb = len(block_sizes)
        for k, (blocks, _) in enumerate(constraints):
            if len(blocks) != nb:
                raise MalformedSDPError(f"constraint {k} has {len(blocks)} blocks, expected {nb}")
        A = tuple(np.stack([np.asarray(c[0][b], dtype=float) for c in constraints]) for b in range(nb))
        return cls(tuple(block_sizes), tuple(objective), A, np.array([c[1] for c in constraints], float))

    def validate(self) -> None:
        if not self.block_sizes or any(s <= 0 for s in self.block_sizes):
            raise MalformedSDPError("block sizes must be positive integers")
        if len(self.C) != len(self.block_sizes) or len(self.A) != len(self.block_sizes):
            raise MalformedSDPError("number of blocks does not match block_sizes")
        m = len(self.a)
        if m < 1:
            raise MalformedSDPError("at least one constraint is required")
        for b, s in enumerate(self.block_sizes):
            if self.C[b].shape != (s, s):
                raise MalformedSDPError(f"objective block {b} has shape {self.C[b].shape}, expected {(s, s)}")
            if self.A[b].shape != (m, s, s):
                raise MalformedSDPError(f"constraint block {b} has shape {self.A[b].shape}, expected {(m, s, s)}")
            if not np.all(np.isfinite(self.C[b])) or not np.all(np.isfinite(self.A[b])):
                raise MalformedSDPError(f"non-finite data in block {b}")
            if not _is_symmetric(self.C[b]):
                raise MalformedSDPError(f"objective block {b} is not symmetric")
            if not _is_symmetric(self.A[b]):
                bad = int(np.argmax(np.abs(self.A[b] - np.swapaxes(self.A[b], -1, -2)).reshape(m, -1).max(axis=1)))
                raise MalformedSDPError(f"constraint {bad} block {b} is not symmetric")

    # linear maps
    def apply(self, X: Sequence[np.ndarray]) -> np.ndarray:
        """A(X)_i = tr(A_i X)."""
        out = np.zeros(self.m)
        for Ab, Xb in zip(self.A, X):
            out += Ab.reshape(self.m, -1) @ Xb.reshape(-1)
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        """A^T(y) = sum_i y_i A_i, per block."""
        return [np.tensordot(y, Ab, axes=1) for Ab in self.A]

    def dual_slack(self, y: np.ndarray) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise ValueError(f"dual vector has shape {y.shape}, expected ({self.m},)")
        return [S - Cb for S, Cb in zip(self.adjoint(y), self.C)]

    def objective(self, X: Sequence[np.ndarray]) -> float:
        return float(sum(np.vdot(Cb, Xb) for Cb, Xb in zip(self.C, X)))

    def scale(self) -> float:
        return 1.0 + max(
            max(float(np.abs(c).max()) for c in self.C),
            max(float(np.abs(a).max()) for a in self.A),
            float(np.abs(self.a).max()),
        )


@dataclass
class SDPSolution:
    status: SDPStatus
    X: list[np.ndarray]
    y: np.ndarray
    Z: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    certified_dual_bound: float | None = None
    certified_primal_bound: float | None = None
    iterations: int = 0
    ray: np.ndarray | list[np.ndarray] | None = None
    history: list[tuple[float, float, float, float]] = field(default_factory=list, repr=False)


def _is_symmetric(M: np.ndarray) -> bool:
    T = np.swapaxes(M, -1, -2)
    scale = max(1.0, float(np.abs(M).max())) if M.size else 1.0
    return bool(np.all(np.abs(M - T) <= 1e-12 * scale))


# PSD verification


def _ldl_pivoted_psd(M: np.ndarray, shift: float) -> bool:
    """Symmetric pivoted Cholesky of M + shift*I; True iff all pivots stay positive."""
    A = np.array(M, dtype=float) + shift * np.eye(len(M))
    n = len(A)
    for k in range(n):
        diag = np.diagonal(A)[k:]
        p = k + int(np.argmax(diag))
        piv = A[p, p]
        if piv <= 0.0:
            # the trailing block must vanish exactly for a PSD matrix
            return bool(piv == 0.0 and np.all(A[k:, k:] == 0.0))
        if p != k:
            A[[k, p], :] = A[[p, k], :]
            A[:, [k, p]] = A[:, [p, k]]
        col = A[k + 1 :, k] / math.sqrt(A[k, k])
        A[k + 1 :, k + 1 :] -= np.outer(col, col)
    return True


def verify_psd(blocks: Sequence[np.ndarray], shift: float = 0.0) -> bool:
    """True when every block plus ``shift * I`` admits a pivoted Cholesky factorization."""
    return all(_ldl_pivoted_psd(0.5 * (B + B.T), shift) for B in blocks)


def default_margin(prog: BlockSDP) -> float:
    trace_norm = sum(float(np.abs(np.linalg.eigvalsh(c)).sum()) for c in prog.C)
    return 1e-9 * max(trace_norm, 1.0)


def certify_dual_bound(prog: BlockSDP, y: np.ndarray, margin: float | None = None) -> float | None:
    """Dual objective a^T y if the dual slack S(y) is verified PSD, else None.

    Verification runs a pivoted factorization of S(y) + margin*I, so the
    returned value bounds the primal optimum from above up to margin * tr(X*).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (prog.m,):
        raise ValueError(f"dual vector has shape {y.shape}, expected ({prog.m},)")
    if margin is None:
        margin = default_margin(prog)
    if verify_psd(prog.dual_slack(y), margin):
        return float(prog.a @ y)
    return None


def certify_primal_bound(
    prog: BlockSDP, X: Sequence[np.ndarray], dual_bounds: np.ndarray, margin: float = 0.0
) -> float | None:
    """Rigorous lower bound on a^T y over all dual-feasible y with |y_i| <= dual_bounds[i].

    Uses an approximately feasible primal X: if X is verified PSD then for any
    such y, a^T y = tr(S(y) X) + tr(C X) + sum_i y_i r_i >= tr(C X) - sum |r_i| ybar_i
    where r = a - A(X). Rows with an infinite bound must have zero residual.
    """
    if len(X) != len(prog.block_sizes):
        raise ValueError("X has the wrong number of blocks")
    if not verify_psd(X, 0.0):
        return None
    r = prog.a - prog.apply(X)
    bounds = np.asarray(dual_bounds, dtype=float)
    if bounds.shape != r.shape:
        raise ValueError("dual_bounds must have one entry per constraint")
    penalty = np.where(r == 0.0, 0.0, np.abs(r) * bounds)
    if not np.all(np.isfinite(penalty)):
        return None
    value = prog.objective(X)
    return float(value - penalty.sum() - margin * (1.0 + abs(value)))


# solver internals


class _Layout:
    """Groups equal-size blocks into stacked arrays."""

    def __init__(self, prog: BlockSDP):
        self.sizes = prog.block_sizes
        self.groups: list[tuple[int, list[int]]] = []
        by_size: dict[int, list[int]] = {}
        for b, s in enumerate(self.sizes):
            by_size.setdefault(s, []).append(b)
        for s in sorted(by_size):
            self.groups.append((s, by_size[s]))
        m = prog.m
        # A_g: (m, g, s, s); C_g: (g, s, s)
        self.A = [np.stack([prog.A[b] for b in idx], axis=1) for s, idx in self.groups]
        self.Aflat = [Ag.reshape(m, -1) for Ag in self.A]
        self.C = [np.stack([prog.C[b] for b in idx]) for s, idx in self.groups]
        self.dim = sum(self.sizes)

    def split(self, stacked: list[np.ndarray]) -> list[np.ndarray]:
        out: list[np.ndarray] = [None] * len(self.sizes)  # type: ignore[list-item]
        for (s, idx), arr in zip(self.groups, stacked):
            for k, b in enumerate(idx):
                out[b] = arr[k].copy()
        return out

    def identity(self, scale: float) -> list[np.ndarray]:
        return [scale * np.broadcast_to(np.eye(s), (len(idx), s, s)).copy() for s, idx in self.groups]

    def op(self, X: list[np.ndarray]) -> np.ndarray:
        return sum(Af @ Xg.reshape(-1) for Af, Xg in zip(self.Aflat, X))

    def adj(self, y: np.ndarray) -> list[np.ndarray]:
        return [(y @ Af).reshape(Cg.shape) for Af, Cg in zip(self.Aflat, self.C)]


def _inner(U: list[np.ndarray], V: list[np.ndarray]) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(U, V)))


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _max_step(lam: np.ndarray, dir_scaled: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha * D >= 0, D given in the NT-scaled frame."""
    r = 1.0 / np.sqrt(lam)
    M = dir_scaled * r[..., :, None] * r[..., None, :]
    ev = np.linalg.eigvalsh(_sym(M))
    lo = float(ev[..., 0].min()) if ev.size else 0.0
    return math.inf if lo >= 0 else -1.0 / lo


def _presolve(prog: BlockSDP, tol: float):
    """Detect linearly dependent constraints.

    Returns (keep_indices, ray) where ray is a certificate y with A^T y = 0 and
    a^T y < 0 when the dependent rows are inconsistent.
    """
    m = prog.m
    rows = np.hstack([Ab.reshape(m, -1) for Ab in prog.A])
    norms = np.linalg.norm(rows, axis=1)
    zero = norms <= 1e-14 * max(1.0, norms.max())
    for i in np.flatnonzero(zero):
        if abs(prog.a[i]) > tol:
            y = np.zeros(m)
            y[i] = -np.sign(prog.a[i])
            return None, y
    live = np.flatnonzero(~zero)
    R = rows[live] / norms[live, None]
    w, V = np.linalg.eigh(R @ R.T)
    small = w <= 1e-20 * max(w[-1], 1.0) + 1e-13
    if not small.any():
        return live, None
    # left null space of the live rows
    null = V[:, small]
    scaled_a = prog.a[live] / norms[live]
    for k in range(null.shape[1]):
        v = null[:, k]
        val = float(v @ scaled_a)
        if abs(val) > tol * (1.0 + np.abs(scaled_a).max()):
            y = np.zeros(m)
            y[live] = -np.sign(val) * v / norms[live] / abs(val)
            return None, y
    # consistent: keep a maximal independent subset via pivoted QR
    from scipy.linalg import qr

    rank = int((~small).sum())
    _, _, piv = qr(R.T, pivoting=True, mode="economic")
    keep = np.sort(live[piv[:rank]])
    return keep, None


def _subprogram(prog: BlockSDP, keep: np.ndarray) -> BlockSDP:
    return BlockSDP(prog.block_sizes, prog.C, tuple(Ab[keep] for Ab in prog.A), prog.a[keep])


def solve(
    prog: BlockSDP,
    tol: float = 1e-8,
    max_iter: int = 200,
    dual_bounds: np.ndarray | None = None,
    certify: bool = True,
) -> SDPSolution:
    """Solve ``prog`` to relative gap and feasibility ``tol``.

    When ``dual_bounds`` is given, every interior iterate is passed through
    :func:`certify_primal_bound` and the best value is reported in
    ``certified_primal_bound``; this is valid whatever the final status.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    prog.validate()
    m_full = prog.m
    keep, ray = _presolve(prog, tol)
    if ray is not None:
        sizes = prog.block_sizes
        zero = [np.zeros((s, s)) for s in sizes]
        margin = default_margin(prog)
        if verify_psd(prog.adjoint(ray), margin) and prog.a @ ray < 0:
            return SDPSolution(SDPStatus.PRIMAL_INFEASIBLE, zero, ray, zero, math.nan, -math.inf, ray=ray)
        return SDPSolution(SDPStatus.NUMERICAL_LIMIT, zero, np.zeros(m_full), zero, math.nan, math.nan)
    sub = prog if len(keep) == m_full else _subprogram(prog, keep)
    cert_fn = None
    if dual_bounds is not None:
        # residuals of every original row count, including rows dropped by presolve
        full = _Layout(prog)
        bounds = np.asarray(dual_bounds, dtype=float)
        if bounds.shape != (m_full,):
            raise ValueError("dual_bounds must have one entry per constraint")

        def cert_fn(Xg, pobj):
            r = prog.a - full.op(Xg)
            penalty = float(np.where(r == 0.0, 0.0, np.abs(r) * bounds).sum())
            return pobj - penalty - 1e-12 * (1.0 + abs(pobj) + penalty)

    sol = _ipm(sub, tol, max_iter, cert_fn)
    if len(keep) != m_full:
        y = np.zeros(m_full)
        y[keep] = sol.y
        sol.y = y
        if isinstance(sol.ray, np.ndarray) and sol.status is SDPStatus.PRIMAL_INFEASIBLE:
            r = np.zeros(m_full)
            r[keep] = sol.ray
            sol.ray = r
    if certify and sol.status is SDPStatus.OPTIMAL:
        sol.certified_dual_bound = certify_dual_bound(prog, sol.y)
        if sol.certified_dual_bound is None and tol > 1e-12:
            # the slack of a barely converged y can sit just outside the margin
            tighter = solve(prog, max(tol * 1e-2, 1e-12), max_iter, dual_bounds, certify)
            if tighter.status is SDPStatus.OPTIMAL:
                return tighter
    return sol


def _ipm(prog: BlockSDP, tol: float, max_iter: int, cert_fn) -> SDPSolution:
    with np.errstate(all="ignore"):
        return _ipm_loop(prog, tol, max_iter, cert_fn)


def _ipm_loop(prog: BlockSDP, tol: float, max_iter: int, cert_fn) -> SDPSolution:
    L = _Layout(prog)
    m = prog.m
    a = prog.a
    norm_a = float(np.linalg.norm(a))
    norm_C = math.sqrt(sum(float(np.vdot(c, c)) for c in L.C))
    start = prog.scale()
    X = L.identity(start)
    Z = L.identity(start)
    y = np.zeros(m)
    margin = default_margin(prog)
    # objectives this large indicate an iterate running along a ray
    ray_scale = 1e4 * (1.0 + norm_a + norm_C)
    best_cert = -math.inf
    best_iter = 0
    history = []
    status = SDPStatus.NUMERICAL_LIMIT
    ray = None
    last_good = (X, y, Z)
    it = 0
    for it in range(1, max_iter + 1):
        AX = L.op(X)
        rp = a - AX
        ATy = L.adj(y)
        rd = [Cg - Sg + Zg for Cg, Sg, Zg in zip(L.C, ATy, Z)]
        pobj = _inner(L.C, X)
        dobj = float(a @ y)
        mu = _inner(X, Z) / L.dim
        pinf = float(np.linalg.norm(rp)) / (1.0 + norm_a)
        dinf = math.sqrt(sum(float(np.vdot(r, r)) for r in rd)) / (1.0 + norm_C)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        history.append((pobj, dobj, pinf, dinf))

        # factor X; interior iterates are PD by construction
        try:
            LX = [np.linalg.cholesky(_sym(x)) for x in X]
        except np.linalg.LinAlgError:
            break
        last_good = (X, y, Z)
        if cert_fn is not None:
            cert = cert_fn(X, pobj)
            if cert > best_cert + tol * (1.0 + abs(cert)):
                best_iter = it
            best_cert = max(best_cert, cert)
            # the certified value only needs the primal iterate; stop once it meets
            # the dual objective of a nearly feasible y, or stalls just below it
            if dinf <= math.sqrt(tol):
                slack = best_cert - dobj + tol * (1.0 + abs(dobj))
                stalled = it - best_iter >= 3 and best_cert >= dobj - 1e3 * tol * (1.0 + abs(dobj))
                if slack >= 0 or stalled:
                    status = SDPStatus.OPTIMAL
                    break

        if gap <= tol and pinf <= tol and dinf <= tol:
            status = SDPStatus.OPTIMAL
            break

        # improving rays
        if dobj < -ray_scale and it > 3:
            yh = y / (-dobj)
            if verify_psd(L.split(L.adj(yh)), margin):
                status, ray = SDPStatus.PRIMAL_INFEASIBLE, yh
                break
        if pobj > ray_scale and it > 3:
            ax = AX / pobj
            if float(np.linalg.norm(ax)) <= tol * (1.0 + norm_a):
                status, ray = SDPStatus.DUAL_INFEASIBLE, L.split([x / pobj for x in X])
                break

        try:
            # NT scaling: X = G diag(lam) G^T, Z = G^-T diag(lam) G^-1, W = G G^T
            Gs, Ginvs, lams, Ws = [], [], [], []
            ok = True
            for Lg, Zg in zip(LX, Z):
                K = np.swapaxes(Lg, -1, -2) @ Zg @ Lg
                w, U = np.linalg.eigh(_sym(K))
                if np.any(w <= 0):
                    ok = False
                    break
                lam = np.sqrt(w)
                G = Lg @ U / np.sqrt(lam)[..., None, :]
                Linv = np.linalg.inv(Lg)
                Ginv = np.sqrt(lam)[..., :, None] * (np.swapaxes(U, -1, -2) @ Linv)
                Gs.append(G)
                Ginvs.append(Ginv)
                lams.append(lam)
                Ws.append(G @ np.swapaxes(G, -1, -2))
            if not ok:
                break

            # Schur complement M_ij = sum tr(A_i W A_j W)
            M = np.zeros((m, m))
            for Ag, Af, W in zip(L.A, L.Aflat, Ws):
                T = W[None] @ Ag @ W[None]
                M += Af @ T.reshape(m, -1).T
            M = 0.5 * (M + M.T)
            try:
                chol = np.linalg.cholesky(M)
                solveM = lambda r: np.linalg.solve(chol.T, np.linalg.solve(chol, r))  # noqa: E731
            except np.linalg.LinAlgError:
                reg = 1e-12 * max(1.0, float(np.abs(np.diag(M)).max()))
                try:
                    chol = np.linalg.cholesky(M + reg * np.eye(m))
                    solveM = lambda r: np.linalg.solve(chol.T, np.linalg.solve(chol, r))  # noqa: E731
                except np.linalg.LinAlgError:
                    break
            WrdW = [W @ r @ W for W, r in zip(Ws, rd)]

            def direction(Rc):
                # Rc in the scaled frame; returns (dX, dy, dZ, dX_scaled, dZ_scaled)
                GRG = [G @ R @ np.swapaxes(G, -1, -2) for G, R in zip(Gs, Rc)]
                rhs = L.op([g + w for g, w in zip(GRG, WrdW)]) - rp
                dy = solveM(rhs)
                dZ = [_sym(s - r) for s, r in zip(L.adj(dy), rd)]
                dX = [_sym(g - W @ z @ W) for g, W, z in zip(GRG, Ws, dZ)]
                dXs = [Gi @ x @ np.swapaxes(Gi, -1, -2) for Gi, x in zip(Ginvs, dX)]
                dZs = [np.swapaxes(G, -1, -2) @ z @ G for G, z in zip(Gs, dZ)]
                return dX, dy, dZ, dXs, dZs

            def steps(dXs, dZs):
                ap = min((_max_step(l, d) for l, d in zip(lams, dXs)), default=math.inf)
                ad = min((_max_step(l, d) for l, d in zip(lams, dZs)), default=math.inf)
                return ap, ad

            # predictor
            Rc_aff = [-l[..., :, None] * np.eye(l.shape[-1]) for l in lams]
            dX, dy, dZ, dXs, dZs = direction(Rc_aff)
            ap, ad = steps(dXs, dZs)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = _inner([x + ap * d for x, d in zip(X, dX)], [z + ad * d for z, d in zip(Z, dZ)]) / L.dim
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

            # corrector
            Rc = []
            for l, xs, zs in zip(lams, dXs, dZs):
                s = l.shape[-1]
                R = 2.0 * sigma * mu * np.eye(s) - 2.0 * (l**2)[..., :, None] * np.eye(s)
                R = R - (xs @ zs + zs @ xs)
                Rc.append(R / (l[..., :, None] + l[..., None, :]))
            dX, dy, dZ, dXs, dZs = direction(Rc)
            ap, ad = steps(dXs, dZs)
            tau = 0.98 if mu < 1e-4 else 0.95
            ap = min(1.0, tau * ap)
            ad = min(1.0, tau * ad)
            if ap < 1e-12 and ad < 1e-12:
                break
            X = [_sym(x + ap * d) for x, d in zip(X, dX)]
            y = y + ad * dy
            Z = [_sym(z + ad * d) for z, d in zip(Z, dZ)]
        except np.linalg.LinAlgError:
            break
        if not (np.isfinite(y).all() and all(np.isfinite(x).all() for x in X) and all(np.isfinite(z).all() for z in Z)):
            break

    X, y, Z = last_good if status is SDPStatus.NUMERICAL_LIMIT else (X, y, Z)
    pobj = _inner(L.C, X)
    dobj = float(a @ y)
    if status is SDPStatus.NUMERICAL_LIMIT:
        # accept a stalled iterate that is still accurate to sqrt(tol)
        rp = a - L.op(X)
        ATy = L.adj(y)
        rd = [Cg - Sg + Zg for Cg, Sg, Zg in zip(L.C, ATy, Z)]
        pinf = float(np.linalg.norm(rp)) / (1.0 + norm_a)
        dinf = math.sqrt(sum(float(np.vdot(r, r)) for r in rd)) / (1.0 + norm_C)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        loose = math.sqrt(tol)
        if gap <= loose and pinf <= loose and dinf <= loose:
            status = SDPStatus.OPTIMAL
    return SDPSolution(
        status=status,
        X=L.split(X),
        y=y,
        Z=L.split(Z),
        primal_objective=pobj,
        dual_objective=dobj,
        certified_primal_bound=best_cert if best_cert > -math.inf else None,
        iterations=it,
        ray=ray,
        history=history,
    )


# debug dump


def write_sparse(prog: BlockSDP, path) -> None:
    """Write ``prog`` in a sparse text format.

    Line 1: ``m nblocks``; line 2: block sizes; line 3: right-hand side a;
    then one ``constraint block row col value`` line per nonzero upper-triangle
    entry, 1-based, with constraint 0 holding the objective C.
    """
    lines = [f"{prog.m} {len(prog.block_sizes)}", " ".join(map(str, prog.block_sizes)), " ".join(repr(float(v)) for v in prog.a)]
    for b, Cb in enumerate(prog.C):
        for i, j in zip(*np.nonzero(np.triu(Cb))):
            lines.append(f"0 {b + 1} {i + 1} {j + 1} {float(Cb[i, j])!r}")
    for b, Ab in enumerate(prog.A):
        for k, i, j in zip(*np.nonzero(np.triu(Ab))):
            lines.append(f"{k + 1} {b + 1} {i + 1} {j + 1} {float(Ab[k, i, j])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sparse(path) -> BlockSDP:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    m, nb = int(rows[0][0]), int(rows[0][1])
    sizes = [int(v) for v in rows[1]]
    a = np.array([float(v) for v in rows[2]])
    C = [np.zeros((s, s)) for s in sizes]
    A = [np.zeros((m, s, s)) for s in sizes]
    for k, b, i, j, v in rows[3:]:
        k, b, i, j, v = int(k), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        target = C[b] if k == 0 else A[b][k - 1]
        target[i, j] = v
        target[j, i] = v
    if len(sizes) != nb or len(a) != m:
        raise MalformedSDPError("header does not match contents")
    return BlockSDP(tuple(sizes), tuple(C), tuple(A), a)
