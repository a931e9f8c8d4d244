import json
from pathlib import Path

import pytest
import yaml

from boxroad import cli
from boxroad.geometry import Box

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def write_problem(tmp_path, name="p.yaml", **fields):
    data = {"vars": ["x", "y"], "equalities": ["x^2 + y^2 - 1"], "box": [[-2, 2], [-2, 2]],
            "resolution": 0.5, "degree": 4}
    data.update(fields)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_enclose_writes_result(tmp_path):
    prob = write_problem(tmp_path)
    out = tmp_path / "r.json"
    assert cli.main(["enclose", prob, "-o", str(out), "--threads", "1"]) == cli.EXIT_OK
    data = json.loads(out.read_text())
    assert data["mode"] == "enclose" and data["complete"]
    assert len(data["boxes"]) == len(data["components"]) > 0
    meta = data["metadata"]
    assert meta["sdp_count"] > 0 and meta["config"]["resolution"] == 0.5
    assert "enclose" in meta["wall_time"]


def test_malformed_expression_reports_position(tmp_path, capsys):
    prob = write_problem(tmp_path, equalities=["x^2 + * y"])
    assert cli.main(["enclose", prob, "--threads", "1"]) == cli.EXIT_INPUT
    err = capsys.readouterr().err
    assert "equality 1" in err and "^" in err and "position" in err


@pytest.mark.parametrize("fields", [
    {"box": [[-2, 2]]},
    {"box": [[2, -2], [-2, 2]]},
    {"resolution": 0},
    {"vars": ["x", "x"]},
    {"equalities": ["x + w"]},
])
def test_invalid_problems(tmp_path, fields):
    prob = write_problem(tmp_path, **fields)
    assert cli.main(["enclose", prob, "--threads", "1"]) == cli.EXIT_INPUT


def test_missing_file_and_bad_threads(tmp_path):
    assert cli.main(["enclose", str(tmp_path / "nope.yaml"), "--threads", "1"]) == cli.EXIT_INPUT
    assert cli.main(["enclose", write_problem(tmp_path), "--threads", "0"]) == cli.EXIT_INPUT


def test_budget_exit_code(tmp_path):
    prob = write_problem(tmp_path, resolution=0.05)
    assert cli.main(["enclose", prob, "--budget", "3", "--threads", "1", "-o", str(tmp_path / "r.json")]) == cli.EXIT_BUDGET
    assert not json.loads((tmp_path / "r.json").read_text())["complete"]


def test_resolution_monotone(tmp_path):
    prob = write_problem(tmp_path)
    counts = []
    for rho in ("1.0", "0.25"):
        out = tmp_path / f"r{rho}.json"
        assert cli.main(["enclose", prob, "--resolution", rho, "--threads", "1", "-o", str(out)]) == 0
        counts.append(len(json.loads(out.read_text())["boxes"]))
    assert counts[0] <= counts[1]


def test_csv_round_trip(tmp_path):
    prob = write_problem(tmp_path)
    out = tmp_path / "r.json"
    cli.main(["enclose", prob, "-o", str(out), "--threads", "1"])
    csv = tmp_path / "r.csv"
    assert cli.main(["export", str(out), "--format", "csv", "-o", str(csv)]) == 0
    boxes, comps = cli.read_csv_boxes(str(csv))
    data = json.loads(out.read_text())
    assert comps == data["components"]
    for b, raw in zip(boxes, data["boxes"]):
        for (lo, hi), (a, c) in zip(b.intervals, raw):
            assert abs(lo - a) <= 1e-15 * max(1, abs(a)) and abs(hi - c) <= 1e-15 * max(1, abs(c))


def test_obj_unit_cube(tmp_path):
    res = tmp_path / "cube.json"
    res.write_text(json.dumps({"boxes": [Box.cube(3, 0, 1).to_list()], "edges": [], "components": [0]}))
    obj = tmp_path / "cube.obj"
    assert cli.main(["export", str(res), "--format", "obj", "-o", str(obj)]) == 0
    lines = obj.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 8
    assert sum(l.startswith("l ") for l in lines) == 12


def test_obj_rectangle_and_empty(tmp_path):
    res = tmp_path / "sq.json"
    res.write_text(json.dumps({"boxes": [Box.cube(2, 0, 1).to_list()], "edges": [], "components": [0]}))
    obj = tmp_path / "sq.obj"
    cli.main(["export", str(res), "--format", "obj", "-o", str(obj)])
    lines = obj.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 4 and sum(l.startswith("l ") for l in lines) == 4
    res.write_text(json.dumps({"boxes": [], "edges": [], "components": []}))
    cli.main(["export", str(res), "--format", "obj", "-o", str(obj)])
    assert obj.read_text() == ""


def test_export_rejects_dangling_edges(tmp_path):
    res = tmp_path / "bad.json"
    res.write_text(json.dumps({"boxes": [Box.cube(2, 0, 1).to_list()], "edges": [[0, 3]], "components": [0]}))
    assert cli.main(["export", str(res)]) == cli.EXIT_INPUT


def test_verify_complete_and_truncated(tmp_path):
    prob = write_problem(tmp_path)
    out = tmp_path / "r.json"
    cli.main(["enclose", prob, "-o", str(out), "--threads", "1"])
    assert cli.main(["verify", str(out), prob, "--samples", "200"]) == cli.EXIT_OK
    data = json.loads(out.read_text())
    half = len(data["boxes"]) // 2
    data["boxes"], data["components"], data["edges"] = data["boxes"][:half], data["components"][:half], []
    out.write_text(json.dumps(data))
    assert cli.main(["verify", str(out), prob, "--samples", "200"]) != cli.EXIT_OK


def test_verify_empty_variety(tmp_path, capsys):
    prob = write_problem(tmp_path, equalities=["x^2 + y^2 + 1"])
    out = tmp_path / "r.json"
    assert cli.main(["enclose", prob, "-o", str(out), "--threads", "1"]) == 0
    assert json.loads(out.read_text())["boxes"] == []
    assert cli.main(["verify", str(out), prob]) == cli.EXIT_OK
    assert "samples=0 covered=0 missed=0" in capsys.readouterr().out


def test_skeleton_needs_two_variables(tmp_path):
    prob = write_problem(tmp_path, vars=["x"], equalities=["x^2 - 1"], box=[[-2, 2]])
    assert cli.main(["skeleton", prob, "--threads", "1"]) == cli.EXIT_INPUT


def test_roadmap_two_circles_disconnected(tmp_path):
    out = tmp_path / "r.json"
    code = cli.main(["roadmap", str(PROBLEMS / "two_circles.yaml"), "-o", str(out), "--threads", "1"])
    assert code == cli.EXIT_DISCONNECTED
    data = json.loads(out.read_text())
    assert data["query_status"] == "Disconnected" and data["path"] is None


def test_roadmap_off_variety_goal(tmp_path):
    prob = write_problem(tmp_path, start=[1.0, 0.0], goal=[0.0, 0.0])
    assert cli.main(["roadmap", prob, "--threads", "1"]) == cli.EXIT_INPUT


def test_roadmap_needs_endpoints(tmp_path):
    assert cli.main(["roadmap", write_problem(tmp_path), "--threads", "1"]) == cli.EXIT_INPUT


def test_shipped_problems_load():
    for path in sorted(PROBLEMS.glob("*.yaml")):
        prob = cli.load_problem(str(path))
        assert prob.ambient().n == prob.n
