"""Command-line driver.

Problem files are YAML mappings::

    vars: [x, y]
    equalities: ["(x^2+y^2)^2 - x^3 + 3*x*y^2"]
    inequalities: []
    box: [[-2, 2], [-2, 2]]
    resolution: 0.1
    degree: 5
    epsilon: 0.01          # skeleton/roadmap only, default resolution/10
    start: [0.5, 0.0]      # roadmap only
    goal: [-0.25, 0.43]
    budget: 1000000
    tolerance: 1.0e-8      # SDP tolerance

Results are written as JSON.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

import numpy as np
import yaml

from . import boxer, oracle, roadmap
from .boxer import BoxGraph, EnclosureConfig
from .geometry import Box, SemialgebraicSystem
from .poly import ParseError, Polynomial, parse_expression

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DISCONNECTED = 2
EXIT_BUDGET = 3


class InputError(Exception):
    pass


@dataclass
class ProblemFile:
    vars: list[str]
    equalities: list[str]
    inequalities: list[str]
    box: list[tuple[float, float]]
    resolution: float
    degree: int
    epsilon: float | None = None
    start: list[float] | None = None
    goal: list[float] | None = None
    budget: int | None = None
    tolerance: float | None = None

    @property
    def n(self) -> int:
        return len(self.vars)

    def ambient(self) -> Box:
        return Box.from_intervals(self.box)

    def polynomials(self) -> tuple[list[Polynomial], list[Polynomial]]:
        return (
            [_parse(t, self.vars, f"equality {k + 1}") for k, t in enumerate(self.equalities)],
            [_parse(t, self.vars, f"inequality {k + 1}") for k, t in enumerate(self.inequalities)],
        )

    def system(self) -> SemialgebraicSystem:
        eqs, ineqs = self.polynomials()
        return SemialgebraicSystem(self.n, tuple(eqs), tuple(ineqs))

    def config(self, threads: int = 1) -> EnclosureConfig:
        kw = {"resolution": self.resolution, "degree": self.degree, "threads": threads}
        if self.budget is not None:
            kw["budget"] = self.budget
        if self.tolerance is not None:
            kw["sdp_tol"] = self.tolerance
        return EnclosureConfig(**kw)


def _parse(text: str, names, label: str) -> Polynomial:
    try:
        return parse_expression(str(text), names)
    except ParseError as exc:
        pointer = " " * exc.position + "^"
        raise InputError(f"{label}: {exc}\n  {text}\n  {pointer}") from None


def load_problem(path: str) -> ProblemFile:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise InputError(f"{path} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a mapping at top level")
    try:
        names = [str(v) for v in data["vars"]]
        box = [(float(a), float(b)) for a, b in data["box"]]
        prob = ProblemFile(
            vars=names,
            equalities=[str(e) for e in data.get("equalities") or []],
            inequalities=[str(e) for e in data.get("inequalities") or []],
            box=box,
            resolution=float(data.get("resolution", 0.1)),
            degree=int(data.get("degree", 4)),
            epsilon=None if data.get("epsilon") is None else float(data["epsilon"]),
            start=None if data.get("start") is None else [float(v) for v in data["start"]],
            goal=None if data.get("goal") is None else [float(v) for v in data["goal"]],
            budget=None if data.get("budget") is None else int(data["budget"]),
            tolerance=None if data.get("tolerance") is None else float(data["tolerance"]),
        )
    except KeyError as exc:
        raise InputError(f"{path}: missing required key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    validate_problem(prob)
    return prob


def validate_problem(prob: ProblemFile) -> None:
    if not prob.vars:
        raise InputError("at least one variable is required")
    if len(set(prob.vars)) != len(prob.vars):
        raise InputError("variable names must be distinct")
    if len(prob.box) != prob.n:
        raise InputError(f"box has {len(prob.box)} intervals but there are {prob.n} variables")
    for j, (a, b) in enumerate(prob.box):
        if not a <= b:
            raise InputError(f"box interval {j + 1} is inverted: [{a}, {b}]")
    if not prob.resolution > 0:
        raise InputError("resolution must be positive")
    if prob.degree < 1:
        raise InputError("degree must be >= 1")
    if prob.epsilon is not None and not prob.epsilon > 0:
        raise InputError("epsilon must be positive")
    for label in ("start", "goal"):
        p = getattr(prob, label)
        if p is not None and len(p) != prob.n:
            raise InputError(f"{label} has {len(p)} coordinates, expected {prob.n}")
    prob.polynomials()


def apply_overrides(prob: ProblemFile, args) -> ProblemFile:
    if getattr(args, "resolution", None) is not None:
        prob.resolution = args.resolution
    if getattr(args, "degree", None) is not None:
        prob.degree = args.degree
    if getattr(args, "epsilon", None) is not None:
        prob.epsilon = args.epsilon
    if getattr(args, "budget", None) is not None:
        prob.budget = args.budget
    validate_problem(prob)
    return prob


# result files


def graph_payload(graph: BoxGraph) -> dict:
    return {
        "boxes": [b.to_list() for b in graph.boxes],
        "edges": [list(e) for e in graph.edges],
        "components": list(graph.components),
        "complete": graph.complete,
    }


def boxes_from_payload(data: dict) -> list[Box]:
    return [Box.from_intervals(b) for b in data.get("boxes", [])]


def write_result(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_result(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not a valid result file: {exc}") from None
    n = len(data.get("boxes", []))
    for i, j in data.get("edges", []):
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"{path}: edge ({i}, {j}) refers to a missing box")
    for i in data.get("path") or []:
        if not 0 <= i < n:
            raise InputError(f"{path}: path index {i} refers to a missing box")
    return data


def _metadata(prob: ProblemFile, cfg: EnclosureConfig, timings: dict, sdp_count: int, mode: str) -> dict:
    return {
        "mode": mode,
        "wall_time": timings,
        "sdp_count": sdp_count,
        "config": {
            "vars": prob.vars,
            "equalities": prob.equalities,
            "inequalities": prob.inequalities,
            "box": [list(iv) for iv in prob.box],
            "resolution": cfg.resolution,
            "degree": cfg.degree,
            "epsilon": prob.epsilon,
            "budget": cfg.budget,
            "sdp_tol": cfg.sdp_tol,
            "threads": cfg.threads,
        },
    }


def _sdp_total(*graphs) -> int:
    return int(sum(g.stats.get("sdp_count", 0) for g in graphs))


def _output_path(args, default_suffix: str) -> str:
    if args.output:
        return args.output
    return args.input.rsplit(".", 1)[0] + default_suffix


def _single_g(prob: ProblemFile) -> Polynomial:
    if prob.n < 2:
        raise InputError("skeleton construction needs at least two variables")
    eqs, ineqs = prob.polynomials()
    if len(eqs) != 1 or ineqs:
        raise InputError("skeleton construction needs exactly one equality and no inequalities")
    return eqs[0]


# commands


def cmd_enclose(args) -> int:
    prob = apply_overrides(load_problem(args.input), args)
    cfg = prob.config(args.threads)
    t0 = time.perf_counter()
    graph = boxer.enclose(prob.system(), prob.ambient(), cfg)
    timings = {"enclose": time.perf_counter() - t0}
    payload = {"mode": "enclose", **graph_payload(graph)}
    payload["metadata"] = _metadata(prob, cfg, timings, _sdp_total(graph), "enclose")
    write_result(_output_path(args, ".enclose.json"), payload)
    print(f"boxes={len(graph.boxes)} components={graph.component_count} complete={graph.complete}")
    return EXIT_OK if graph.complete else EXIT_BUDGET


def cmd_skeleton(args) -> int:
    prob = apply_overrides(load_problem(args.input), args)
    g = _single_g(prob)
    cfg = prob.config(args.threads)
    eps = prob.epsilon if prob.epsilon is not None else roadmap.default_epsilon(cfg)
    prob.epsilon = eps
    t0 = time.perf_counter()
    graph = roadmap.build_skeleton(roadmap.SkeletonProblem(g, eps, prob.ambient(), cfg))
    timings = {"skeleton": time.perf_counter() - t0}
    payload = {"mode": "skeleton", **graph_payload(graph)}
    payload["metadata"] = _metadata(prob, cfg, timings, _sdp_total(graph), "skeleton")
    write_result(_output_path(args, ".skeleton.json"), payload)
    print(f"boxes={len(graph.boxes)} components={graph.component_count} complete={graph.complete}")
    return EXIT_OK if graph.complete else EXIT_BUDGET


def cmd_roadmap(args) -> int:
    prob = apply_overrides(load_problem(args.input), args)
    g = _single_g(prob)
    if prob.start is None or prob.goal is None:
        raise InputError("roadmap needs start and goal points")
    cfg = prob.config(args.threads)
    eps = prob.epsilon if prob.epsilon is not None else roadmap.default_epsilon(cfg)
    prob.epsilon = eps
    t0 = time.perf_counter()
    try:
        res = roadmap.lazy_plan(g, prob.start, prob.goal, cfg, prob.ambient(), eps)
    except roadmap.OffVarietyError as exc:
        raise InputError(str(exc)) from None
    timings = {"roadmap": time.perf_counter() - t0}
    payload = {"mode": "roadmap", **graph_payload(res.combined)}
    payload["query_status"] = res.query_status.value
    payload["path"] = res.path
    payload["endpoints"] = list(res.endpoints) if res.endpoints else None
    payload["recursions"] = res.recursions
    payload["skeleton"] = graph_payload(res.skeleton)
    payload["critical_boxes"] = [
        {"box": c.box.to_list(), "center": None if c.center is None else [float(v) for v in c.center]}
        for c in res.critical_boxes
    ]
    payload["slices"] = [{"value": v, **graph_payload(gr)} for v, gr in res.slice_skeletons]
    graphs = [res.skeleton] + [gr for _, gr in res.slice_skeletons] + [gr for _, gr in res.link_slices]
    payload["metadata"] = _metadata(prob, cfg, timings, _sdp_total(*graphs), "roadmap")
    write_result(_output_path(args, ".roadmap.json"), payload)
    print(f"status={res.query_status.value} boxes={len(res.combined.boxes)} recursions={res.recursions}")
    if res.query_status is roadmap.QueryStatus.CONNECTED:
        print("path=" + " ".join(map(str, res.path)))
        return EXIT_OK
    if res.query_status is roadmap.QueryStatus.DISCONNECTED:
        return EXIT_DISCONNECTED
    return EXIT_BUDGET


def cmd_verify(args) -> int:
    data = load_result(args.result)
    prob = load_problem(args.problem)
    mode = data.get("mode", "enclose")
    if mode in ("skeleton", "roadmap"):
        g = _single_g(prob)
        meta = data.get("metadata", {}).get("config", {})
        eps = meta.get("epsilon") or prob.epsilon or prob.resolution / 10.0
        sys_ = roadmap.skeleton_system(g, eps)
    else:
        sys_ = prob.system()
    boxes = boxes_from_payload(data)
    if sys_.equalities:
        pts = oracle.sample_variety(sys_, prob.ambient(), args.samples)
    else:
        pts = np.zeros((0, prob.n))
    if args.samples_csv:
        oracle.write_samples_csv(pts, args.samples_csv)
    report = oracle.verify_enclosure(pts, boxes, args.inflation)
    print(report)
    for p in report.missed_points[:10]:
        print("missed", " ".join(f"{v:.12g}" for v in p))
    return EXIT_OK if report.missed == 0 else EXIT_DISCONNECTED


def export_csv(data: dict, path: str) -> None:
    boxes = data.get("boxes", [])
    comps = data.get("components", [0] * len(boxes))
    with open(path, "w") as fh:
        for b, c in zip(boxes, comps):
            fh.write(",".join([repr(float(v)) for iv in b for v in iv] + [str(int(c))]) + "\n")


def read_csv_boxes(path: str) -> tuple[list[Box], list[int]]:
    boxes, comps = [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            vals = [float(v) for v in parts[:-1]]
            boxes.append(Box(tuple(vals[0::2]), tuple(vals[1::2])))
            comps.append(int(parts[-1]))
    return boxes, comps


def export_obj(data: dict, path: str) -> None:
    lines = []
    offset = 1
    for b in data.get("boxes", []):
        n = len(b)
        if n == 2:
            (x0, x1), (y0, y1) = b
            verts = [(x0, y0, 0.0), (x1, y0, 0.0), (x1, y1, 0.0), (x0, y1, 0.0)]
            segs = [(0, 1), (1, 2), (2, 3), (3, 0)]
        elif n == 3:
            verts = [(b[0][i & 1], b[1][(i >> 1) & 1], b[2][(i >> 2) & 1]) for i in range(8)]
            segs = [(i, i | bit) for i in range(8) for bit in (1, 2, 4) if not i & bit]
        else:
            raise InputError("obj export supports 2 or 3 dimensions")
        lines.extend("v {!r} {!r} {!r}".format(*map(float, v)) for v in verts)
        lines.extend(f"l {a + offset} {c + offset}" for a, c in segs)
        offset += len(verts)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def cmd_export(args) -> int:
    data = load_result(args.result)
    out = args.output or args.result.rsplit(".", 1)[0] + "." + args.format
    if args.format == "csv":
        export_csv(data, out)
    else:
        export_obj(data, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--resolution", type=float, help="largest allowed box side")
    common.add_argument("--degree", type=int, help="relaxation degree d")
    common.add_argument("--epsilon", type=float, help="offset of the skeleton level set")
    common.add_argument("--threads", type=int, help="worker processes (default: number of CPUs)")
    common.add_argument("--budget", type=int, help="maximum number of processed boxes")
    common.add_argument("--output", "-o", help="output file")

    p = argparse.ArgumentParser(prog="boxroad", description="Box enclosures and roadmaps of real algebraic sets.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("enclose", "enclose the variety of a problem file"),
        ("skeleton", "enclose the roadmap skeleton of a single equation"),
        ("roadmap", "connect start and goal through a lazily built roadmap"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("input", help="problem file (YAML)")
    sp = sub.add_parser("verify", parents=[common], help="check a result against sampled variety points")
    sp.add_argument("result")
    sp.add_argument("problem")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--inflation", type=float, default=1e-6)
    sp.add_argument("--samples-csv", help="also write the sampled points as CSV")
    sp = sub.add_parser("export", parents=[common], help="write boxes as CSV rows or an OBJ wireframe")
    sp.add_argument("result")
    sp.add_argument("--format", choices=["csv", "obj"], default="csv")
    return p


COMMANDS = {
    "enclose": cmd_enclose,
    "skeleton": cmd_skeleton,
    "roadmap": cmd_roadmap,
    "verify": cmd_verify,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = boxer.default_threads()
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
