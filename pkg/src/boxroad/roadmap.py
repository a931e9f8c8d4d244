"""Roadmaps of a hypersurface g = 0 built from box enclosures.

The skeleton is the set {g = eps, dg/dx_3 = ... = dg/dx_n = 0}. Points of the
skeleton where dg/dx_2 also vanishes are x1-critical; the hypersurface is
sliced at the x1 values bracketing each such point and the slice curves are
added to the graph so that skeleton pieces get joined.
"""
from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import boxer, oracle
from .boxer import BoxGraph, EnclosureConfig
from .geometry import Box, SemialgebraicSystem
from .poly import Polynomial

log = logging.getLogger(__name__)


class QueryStatus(enum.Enum):
    CONNECTED = "Connected"
    DISCONNECTED = "Disconnected"
    UNRESOLVED = "Unresolved"


class OffVarietyError(ValueError):
    pass


@dataclass(frozen=True)
class SkeletonProblem:
    g: Polynomial
    epsilon: float
    box: Box
    config: EnclosureConfig

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.g.n != self.box.n:
            raise ValueError("polynomial and box dimensions differ")


@dataclass(frozen=True)
class CriticalBox:
    box: Box
    center: np.ndarray | None


@dataclass
class RoadmapResult:
    skeleton: BoxGraph
    critical_boxes: list[CriticalBox]
    slice_skeletons: list[tuple[float, BoxGraph]]
    combined: BoxGraph
    query_status: QueryStatus
    path: list[int] | None = None
    endpoints: tuple[int, int] | None = None
    recursions: int = 0
    link_slices: list[tuple[float, BoxGraph]] = field(default_factory=list)


def default_epsilon(cfg: EnclosureConfig) -> float:
    return cfg.resolution / 10.0


def skeleton_system(g: Polynomial, epsilon: float) -> SemialgebraicSystem:
    if g.n < 2:
        raise ValueError("a skeleton needs at least two variables")
    eqs = [g - epsilon] + [g.partial_derivative(j) for j in range(2, g.n)]
    return SemialgebraicSystem(g.n, tuple(eqs))


def build_skeleton(sp: SkeletonProblem) -> BoxGraph:
    sys = skeleton_system(sp.g, sp.epsilon)
    return boxer.enclose(sys, sp.box, sp.config)


def _hulls(boxes: Sequence[Box], tol: float) -> list[Box]:
    """Merge touching boxes into the bounding box of each connected group."""
    if not boxes:
        return []
    graph = boxer.build_graph(boxes, tol)
    out = []
    for c in sorted(set(graph.components)):
        members = [b for b, k in zip(graph.boxes, graph.components) if k == c]
        lo = np.min([b.lo for b in members], axis=0)
        hi = np.max([b.hi for b in members], axis=0)
        out.append(Box(tuple(lo), tuple(hi)))
    return out


def critical_system(g: Polynomial, epsilon: float) -> SemialgebraicSystem:
    return skeleton_system(g, epsilon).with_equalities([g.partial_derivative(1)])


def find_critical_boxes(
    skeleton: BoxGraph, g: Polynomial, cfg: EnclosureConfig, epsilon: float, tol: float | None = None
) -> list[CriticalBox]:
    """Boxes around the points of the skeleton where dg/dx2 also vanishes, sorted by x1."""
    sys = critical_system(g, epsilon)
    found: list[Box] = []
    dg2 = SemialgebraicSystem(g.n, (g.partial_derivative(1),))
    for b in skeleton.boxes:
        if oracle.interval_excludes(dg2, b):
            continue
        sub = boxer.enclose(sys, b, cfg)
        found.extend(sub.boxes)
    if tol is None:
        tol = 1e-9 * max((b.diameter for b in skeleton.boxes), default=1.0)
    out = []
    for hb in _hulls(found, tol):
        center = oracle.newton_refine(sys.equalities, hb.center)
        out.append(CriticalBox(hb, center))
    out.sort(key=lambda c: (c.box.lo[0], c.box.hi[0]) + c.box.lo[1:])
    if out:
        widths = ", ".join(f"{c.box.hi[0] - c.box.lo[0]:.3g}" for c in out)
        log.info("critical x1-interval widths: %s (one critical value per interval is assumed)", widths)
    return out


def _embed(graph: BoxGraph, lo: float, hi: float | None = None) -> list[Box]:
    """Lift boxes of a slice back into n dimensions with x1 in [lo, hi]."""
    hi = lo if hi is None else hi
    return [b.insert(0, lo, hi) for b in graph.boxes]


def slice_graph(g: Polynomial, value: float, ambient: Box, cfg: EnclosureConfig, epsilon: float) -> BoxGraph:
    """Enclose the slice {g(value, .) = eps} in the remaining coordinates.

    In two or more remaining coordinates the slice skeleton is built; with a
    single coordinate left the slice is a finite point set enclosed directly.
    """
    h = g.substitute(0, value)
    sub_box = ambient.drop(0)
    if h.n >= 2:
        graph = build_skeleton(SkeletonProblem(h, epsilon, sub_box, cfg))
    else:
        graph = boxer.enclose(SemialgebraicSystem(1, (h - epsilon,)), sub_box, cfg)
    return graph


def recurse_slices(
    g: Polynomial,
    critical: Sequence[CriticalBox],
    ambient: Box,
    cfg: EnclosureConfig,
    epsilon: float,
    tol: float | None = None,
) -> list[tuple[float, BoxGraph]]:
    """Slice skeletons at both ends of each critical x1-interval.

    When an interval is no wider than the adjacency tolerance its two ends
    are the same slice up to that tolerance; one enclosure is computed and
    recorded under both values (the same graph object).
    """
    if tol is None:
        tol = cfg.tolerance_for(ambient)
    out = []
    for c in critical:
        lo, hi = c.box.lo[0], c.box.hi[0]
        graph = slice_graph(g, lo, ambient, cfg, epsilon)
        out.append((lo, graph))
        out.append((hi, graph if hi - lo <= tol else slice_graph(g, hi, ambient, cfg, epsilon)))
    return out


def assemble(
    skeleton: BoxGraph,
    critical: Sequence[CriticalBox | Box],
    slices: Sequence[tuple[float, BoxGraph]],
    tol: float,
    extra: Sequence[tuple[float, BoxGraph]] = (),
) -> BoxGraph:
    """Union of skeleton, critical and slice boxes with adjacency recomputed."""
    crit = [c.box if isinstance(c, CriticalBox) else c for c in critical]
    if not crit and not slices and not extra:
        return skeleton
    boxes = list(skeleton.boxes) + crit
    complete = skeleton.complete
    # a graph recorded under several values is lifted once across their range
    spans: dict[int, tuple[BoxGraph, float, float]] = {}
    for value, graph in list(slices) + list(extra):
        _, lo, hi = spans.get(id(graph), (graph, value, value))
        spans[id(graph)] = (graph, min(lo, value), max(hi, value))
    for graph, lo, hi in spans.values():
        boxes.extend(_embed(graph, lo, hi))
        complete = complete and graph.complete
    # identical boxes (e.g. repeated slices) are kept once
    unique = {b.key(): b for b in boxes}
    return boxer.build_graph(list(unique.values()), tol, complete)


def _check_on_variety(p: np.ndarray, g: Polynomial, epsilon: float, ambient: Box) -> None:
    if len(p) != g.n:
        raise OffVarietyError(f"point has {len(p)} coordinates, expected {g.n}")
    if not ambient.contains(p):
        raise OffVarietyError(f"point {tuple(p)} lies outside the ambient box")
    value = g.evaluate(p)
    allowed = 2.0 * epsilon + 1e-9 * max(1.0, float(g.term_magnitude(p[None])[0]))
    if abs(value) > allowed:
        raise OffVarietyError(f"point {tuple(p)} is off the variety: g = {value:.6g}")


def nearest_box(graph: BoxGraph, p: Sequence[float]) -> tuple[int, float]:
    if not graph.boxes:
        return -1, float("inf")
    P = np.asarray(p, dtype=float)
    L = np.array([b.lo for b in graph.boxes])
    H = np.array([b.hi for b in graph.boxes])
    gap = np.maximum(np.maximum(L - P, P - H), 0.0)
    dist = np.linalg.norm(gap, axis=1)
    i = int(np.argmin(dist))
    return i, float(dist[i])


def link_point(
    p: Sequence[float],
    roadmap: BoxGraph,
    g: Polynomial,
    cfg: EnclosureConfig,
    ambient: Box,
    epsilon: float,
    tol: float | None = None,
) -> tuple[BoxGraph, int, tuple[float, BoxGraph] | None]:
    """Join ``p`` to the roadmap through the slice x1 = p1.

    Returns (augmented graph, index of the box holding p, slice used or None).
    """
    P = np.asarray(p, dtype=float)
    _check_on_variety(P, g, epsilon, ambient)
    if tol is None:
        tol = cfg.tolerance_for(ambient)
    inside = roadmap.locate(P, tol)
    if inside:
        return roadmap, inside[0], None
    value = float(P[0])
    graph = slice_graph(g, value, ambient, cfg, epsilon)
    combined = assemble(roadmap, [], [], tol, extra=[(value, graph)])
    idx, dist = nearest_box(combined, P)
    if idx < 0 or dist > cfg.resolution:
        raise OffVarietyError(f"no enclosure box near {tuple(P)} (distance {dist:.3g})")
    return combined, idx, (value, graph)


def query_path(graph: BoxGraph, from_box: int, to_box: int) -> list[int] | QueryStatus:
    """Shortest path in edge count; ties broken toward lower box indices."""
    n = len(graph.boxes)
    for v in (from_box, to_box):
        if not 0 <= v < n:
            raise IndexError(f"box index {v} out of range for {n} boxes")
    nbrs = graph.neighbors()
    prev = [-1] * n
    seen = [False] * n
    seen[from_box] = True
    queue = deque([from_box])
    while queue:
        u = queue.popleft()
        if u == to_box:
            break
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = True
                prev[v] = u
                queue.append(v)
    if not seen[to_box]:
        return QueryStatus.DISCONNECTED
    path = [to_box]
    while path[-1] != from_box:
        path.append(prev[path[-1]])
    return path[::-1]


def _locate(graph: BoxGraph, p: np.ndarray) -> int:
    idx, _ = nearest_box(graph, p)
    return idx


def lazy_plan(
    g: Polynomial,
    x_I: Sequence[float],
    x_G: Sequence[float],
    cfg: EnclosureConfig,
    ambient: Box,
    epsilon: float | None = None,
) -> RoadmapResult:
    """Build only as much of the roadmap as needed to connect x_I and x_G."""
    if epsilon is None:
        epsilon = default_epsilon(cfg)
    pI = np.asarray(x_I, dtype=float)
    pG = np.asarray(x_G, dtype=float)
    _check_on_variety(pI, g, epsilon, ambient)
    _check_on_variety(pG, g, epsilon, ambient)
    tol = cfg.tolerance_for(ambient)
    skeleton = build_skeleton(SkeletonProblem(g, epsilon, ambient, cfg))
    links: list[tuple[float, BoxGraph]] = []
    combined = skeleton
    for p in (pI, pG):
        combined, _, used = link_point(p, combined, g, cfg, ambient, epsilon, tol)
        if used is not None:
            links.append(used)
    critical: list[CriticalBox] = []
    slices: list[tuple[float, BoxGraph]] = []

    def attempt(graph):
        a, b = _locate(graph, pI), _locate(graph, pG)
        res = query_path(graph, a, b)
        return res, (a, b)

    res, ends = attempt(combined)
    recursions = 0
    if isinstance(res, QueryStatus):
        critical = find_critical_boxes(skeleton, g, cfg, epsilon, tol)
        for c in critical:
            slices.extend(recurse_slices(g, [c], ambient, cfg, epsilon, tol))
            recursions += 1
            combined = assemble(skeleton, critical[:recursions], slices, tol, extra=links)
            res, ends = attempt(combined)
            if not isinstance(res, QueryStatus):
                break
    if isinstance(res, QueryStatus):
        status = QueryStatus.UNRESOLVED if not combined.complete else QueryStatus.DISCONNECTED
        path = None
    else:
        status, path = QueryStatus.CONNECTED, res
    return RoadmapResult(skeleton, critical, slices, combined, status, path, ends, recursions, links)


def full_roadmap(
    g: Polynomial, ambient: Box, cfg: EnclosureConfig, epsilon: float | None = None
) -> RoadmapResult:
    """Skeleton, every critical box and every slice, assembled."""
    if epsilon is None:
        epsilon = default_epsilon(cfg)
    tol = cfg.tolerance_for(ambient)
    skeleton = build_skeleton(SkeletonProblem(g, epsilon, ambient, cfg))
    critical = find_critical_boxes(skeleton, g, cfg, epsilon, tol)
    slices = recurse_slices(g, critical, ambient, cfg, epsilon, tol)
    combined = assemble(skeleton, critical, slices, tol)
    return RoadmapResult(skeleton, critical, slices, combined, QueryStatus.UNRESOLVED, recursions=len(critical))
