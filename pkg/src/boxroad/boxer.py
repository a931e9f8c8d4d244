"""Box enclosure of a real variety by alternating shrink and split steps."""
from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import lasserre, oracle
from .geometry import Box, SemialgebraicSystem

__all__ = [
    "Box",
    "SemialgebraicSystem",
    "EnclosureConfig",
    "ShrinkKind",
    "ShrinkOutcome",
    "BoxGraph",
    "shrink",
    "split",
    "enclose",
    "adjacency",
    "components",
    "build_graph",
]


@dataclass(frozen=True)
class EnclosureConfig:
    resolution: float = 0.1
    degree: int = 4
    max_sweeps: int = 3
    improvement: float = 0.05
    adjacency_tol: float | None = None
    min_width: float = 1e-7
    budget: int = 1_000_000
    threads: int = 1
    sdp_tol: float = 1e-8
    rank_ratio: float = 1e-2
    feasibility_slack: float = 1e-4

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.degree < 1:
            raise ValueError("relaxation degree must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def tolerance_for(self, initial: Box) -> float:
        if self.adjacency_tol is not None:
            return self.adjacency_tol
        return 1e-9 * initial.diameter


class ShrinkKind(enum.Enum):
    EMPTY = "Empty"
    SHRUNK = "Shrunk"


@dataclass
class ShrinkOutcome:
    kind: ShrinkKind
    box: Box | None = None
    witness: list[np.ndarray] = field(default_factory=list)
    sdp_count: int = 0
    # solutions of the last sweep, used lazily for split points
    solutions: list = field(default_factory=list, repr=False)
    cfg: EnclosureConfig | None = field(default=None, repr=False)

    def witnesses(self) -> list[np.ndarray]:
        """Extract candidate optimizers from the last sweep (computed on first call)."""
        if not self.witness and self.solutions and self.cfg is not None:
            for sol in self.solutions:
                p = lasserre.extract_minimizer(sol, self.cfg.rank_ratio, self.cfg.feasibility_slack)
                if p is not None:
                    self.witness.append(p)
        return self.witness


@dataclass
class BoxGraph:
    boxes: list[Box]
    edges: list[tuple[int, int]]
    components: list[int]
    complete: bool = True
    stats: dict = field(default_factory=dict)

    @property
    def component_count(self) -> int:
        return len(set(self.components))

    def neighbors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.boxes]
        for i, j in self.edges:
            out[i].append(j)
            out[j].append(i)
        for row in out:
            row.sort()
        return out

    def locate(self, p: Sequence[float], inflation: float = 0.0) -> list[int]:
        return [i for i, b in enumerate(self.boxes) if b.contains(p, inflation)]


def _outward(value: float, lower: bool) -> float:
    pad = 1e-12 * max(1.0, abs(value))
    return value - pad if lower else value + pad


def shrink(b: Box, sys: SemialgebraicSystem, cfg: EnclosureConfig) -> ShrinkOutcome:
    """Certified outer contraction of ``b`` around the variety, or Empty."""
    if b.n != sys.n:
        raise ValueError("box and system dimensions differ")
    if oracle.interval_excludes(sys, b):
        return ShrinkOutcome(ShrinkKind.EMPTY, sdp_count=0)
    count = 1
    if lasserre.detect_empty(sys, b, cfg.degree, cfg.sdp_tol):
        return ShrinkOutcome(ShrinkKind.EMPTY, sdp_count=count)
    box = b
    solutions = []
    for _ in range(cfg.max_sweeps):
        before = box.widths
        solutions = []
        for i in range(sys.n):
            if box.hi[i] - box.lo[i] <= cfg.min_width:
                continue
            for direction in (lasserre.Direction.MIN, lasserre.Direction.MAX):
                sol = lasserre.bound(sys, box, cfg.degree, i, direction, cfg.sdp_tol)
                count += 1
                solutions.append(sol)
                if not sol.informative:
                    continue
                lo, hi = box.lo[i], box.hi[i]
                if direction is lasserre.Direction.MIN:
                    new = _outward(sol.bound, lower=True)
                    if new > hi:
                        return ShrinkOutcome(ShrinkKind.EMPTY, sdp_count=count)
                    lo = max(lo, new)
                else:
                    new = _outward(sol.bound, lower=False)
                    if new < lo:
                        return ShrinkOutcome(ShrinkKind.EMPTY, sdp_count=count)
                    hi = min(hi, new)
                box = box.with_interval(i, lo, hi)
        gain = before - box.widths
        if not np.any(gain > cfg.improvement * np.maximum(before, 1e-300)):
            break
    return ShrinkOutcome(ShrinkKind.SHRUNK, box, sdp_count=count, solutions=solutions, cfg=cfg)


def split(b: Box, witness: Sequence[float] | Sequence[Sequence[float]] | None = None) -> tuple[Box, Box]:
    """Bisect ``b`` across its longest side.

    The cut goes through the first witness whose coordinate lies in the
    central 80% of that side; otherwise through the midpoint.
    """
    widths = b.widths
    if widths.max() <= 0:
        raise ValueError("cannot split a degenerate box")
    j = int(np.argmax(widths))
    lo, hi = b.lo[j], b.hi[j]
    w = hi - lo
    cut = 0.5 * (lo + hi)
    candidates: list = []
    if witness is not None:
        arr = np.asarray(witness, dtype=float)
        candidates = [arr] if arr.ndim == 1 else list(arr)
    for p in candidates:
        if len(p) == b.n and lo + 0.1 * w <= p[j] <= hi - 0.1 * w:
            cut = float(p[j])
            break
    return b.with_interval(j, lo, cut), b.with_interval(j, cut, hi)


def adjacency(boxes: Sequence[Box], tol: float) -> list[tuple[int, int]]:
    if not boxes:
        return []
    L = np.array([b.lo for b in boxes])
    H = np.array([b.hi for b in boxes])
    edges: list[tuple[int, int]] = []
    for i in range(len(boxes) - 1):
        ok = np.all((L[i + 1 :] <= H[i] + tol) & (L[i] <= H[i + 1 :] + tol), axis=1)
        edges.extend((i, i + 1 + int(k)) for k in np.flatnonzero(ok))
    return edges


def components(n_boxes: int, edges: Sequence[tuple[int, int]]) -> list[int]:
    if n_boxes == 0:
        return []
    if edges:
        e = np.array(edges)
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_boxes, n_boxes))
    else:
        g = coo_matrix((n_boxes, n_boxes))
    _, labels = connected_components(g, directed=False)
    return [int(v) for v in labels]


def sort_boxes(boxes: Sequence[Box]) -> list[Box]:
    return sorted(boxes, key=lambda b: b.key())


def build_graph(boxes: Sequence[Box], tol: float, complete: bool = True, stats: dict | None = None) -> BoxGraph:
    boxes = sort_boxes(boxes)
    edges = adjacency(boxes, tol)
    return BoxGraph(boxes, edges, components(len(boxes), edges), complete, dict(stats or {}))


def _process(args):
    """Shrink one box and either finalize it, drop it, or split it."""
    b, sys, cfg = args
    out = shrink(b, sys, cfg)
    if out.kind is ShrinkKind.EMPTY:
        return "empty", [], out.sdp_count
    nb = out.box
    side = nb.longest_side
    if side <= cfg.resolution or side <= cfg.min_width:
        return "final", [nb], out.sdp_count
    return "split", list(split(nb, out.witnesses())), out.sdp_count


def enclose(sys: SemialgebraicSystem, initial: Box, cfg: EnclosureConfig) -> BoxGraph:
    """Enclose the variety of ``sys`` inside ``initial`` by boxes of side <= resolution.

    Boxes are processed in waves; every box is handled independently, so the
    result does not depend on scheduling or on the number of workers.
    """
    if sys.n != initial.n:
        raise ValueError("system and box dimensions differ")
    frontier = [initial]
    final: list[Box] = []
    processed = 0
    sdp_count = 0
    complete = True
    pool = ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        while frontier:
            if processed + len(frontier) > cfg.budget:
                room = max(cfg.budget - processed, 0)
                frontier, rest = frontier[:room], frontier[room:]
                final.extend(rest)
                complete = False
            jobs = [(b, sys, cfg) for b in frontier]
            if pool is not None and len(jobs) > 1:
                results = list(pool.map(_process, jobs, chunksize=max(1, len(jobs) // (4 * cfg.threads))))
            else:
                results = [_process(j) for j in jobs]
            processed += len(frontier)
            nxt: list[Box] = []
            for kind, boxes, cnt in results:
                sdp_count += cnt
                if kind == "final":
                    final.extend(boxes)
                elif kind == "split":
                    nxt.extend(boxes)
            frontier = nxt
            if not complete:
                final.extend(frontier)
                break
    finally:
        if pool is not None:
            pool.shutdown()
    stats = {"processed": processed, "sdp_count": sdp_count}
    return build_graph(final, cfg.tolerance_for(initial), complete, stats)


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
