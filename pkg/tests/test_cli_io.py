import json
from fractions import Fraction

import numpy as np
import pytest

from fleetalloc import io
from fleetalloc.cli import run
from fleetalloc.dynamic import MyopicPolicy, Scenario, generate_scenario, run_scenario
from fleetalloc.errors import ParseError
from fleetalloc.generate import generate
from fleetalloc.instance import AssignmentInstance, Sense
from fleetalloc.report import strip_wall_time


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_two_by_two():
    inst = io.parse_instance_text("2 2 min\n1 2\n4 3\n")
    assert inst.sense is Sense.MINIMIZE_COST
    assert inst.weights() == [[1, 2], [4, 3]]


def test_parse_forbid_block():
    inst = io.parse_instance_text("2 2 min\n1 2\n4 3\nFORBID\n0 1\n")
    assert inst.forbidden.tolist() == [[False, True], [False, False]]


def test_ragged_row_names_line():
    with pytest.raises(ParseError, match="line 3"):
        io.parse_instance_text("# comment\n2 2 min\n1 2 3\n4 3\n")


@pytest.mark.parametrize(
    "text",
    [
        "2 2\n1 2\n4 3\n",
        "2 2 median\n1 2\n4 3\n",
        "2 2 min\n1 x\n4 3\n",
        "2 2 min\n1 2\n4 3\nEXTRA\n",
        "2 2 min\n1 2\n",
        "2 2 max\n1 2\n4 3\nQUAL\n1 0\n",
    ],
)
def test_strict_parse_errors(text):
    with pytest.raises(ParseError, match="line"):
        io.parse_instance_text(text)


def test_text_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n, m = (int(x) for x in rng.integers(1, 6, 2))
        inst = AssignmentInstance.from_matrix(
            rng.integers(-9, 9, (n, m)), sense="max", qualification=rng.random((n, m)) < 0.5,
            forbidden=rng.random((n, m)) < 0.2,
        )
        again = io.parse_instance_text(io.emit_instance_text(inst))
        assert io.digest(again) == io.digest(inst)
        assert again.weights() == inst.weights()


def test_json_instance_and_rationals(tmp_path):
    inst = AssignmentInstance.from_matrix([["1/2", 3], [2, "7/3"]])
    path = tmp_path / "inst.json"
    io.emit_instance(inst, path)
    assert io.parse_instance(path).weights() == [[Fraction(1, 2), 3], [2, Fraction(7, 3)]]


def test_demand_and_resources(tmp_path):
    assert io.parse_demand(write(tmp_path, "d.txt", "2 1\n"), 2).d == (2, 1)
    with pytest.raises(ParseError):
        io.parse_demand(write(tmp_path, "bad.txt", "2 0\n"), 2)
    cons = io.parse_resources(write(tmp_path, "r.txt", "RESOURCE 1\n1 0\n0 1\n"), (2, 2))
    assert cons.budgets == (1,)
    again = io.parse_resources(write(tmp_path, "r2.txt", io.emit_resources(cons)), (2, 2))
    assert again == cons


def test_scenario_round_trip(tmp_path):
    sc = generate_scenario(3, 2, 4, seed=5, mode="reassign").replace(eta=np.full((3, 2), 2))
    path = tmp_path / "sc.json"
    io.emit_scenario(sc, path)
    assert io.parse_scenario(path) == sc
    traj = run_scenario(sc, MyopicPolicy())
    back = io.trajectory_from_obj(json.loads(io.dump_json(io.trajectory_to_obj(traj))))
    assert back == traj


def test_scenario_missing_utilities_default_to_zero(tmp_path):
    obj = {
        "horizon": 2,
        "agents": [{"id": 0, "arrival": 1}],
        "tasks": [{"id": 0, "arrival": 1}],
        "utilities": [{"agent": 0, "task": 0, "period": 2, "value": 4}],
        "mode": "commit",
    }
    sc = io.scenario_from_obj(obj)
    assert sc.utility(1, 0, 0) == 0 and sc.utility(2, 0, 0) == 4


def test_generate_same_seed_identical(tmp_path):
    for what in ("instance", "scenario", "topology"):
        a, b = tmp_path / f"a_{what}.json", tmp_path / f"b_{what}.json"
        for path in (a, b):
            code, _, err = run(["generate", what, "--n", "4", "--m", "3", "--horizon", "3", "--seed", "9", "--out", str(path)])
            assert code == 0, err
        assert a.read_bytes() == b.read_bytes()


def test_generate_complete_topology_diameter(tmp_path):
    code, out, _ = run(["generate", "topology", "--n", "3", "--topology", "complete", "--out", str(tmp_path / "t.json")])
    assert code == 0
    assert json.loads(out)["diameter"] == 1


def test_generate_horizon_one_arrivals():
    sc = generate("scenario", seed=3, n=4, m=4, horizon=1)
    assert set(sc.agent_arrivals) == {1} and set(sc.task_arrivals) == {1}


def test_generate_range_checked():
    with pytest.raises(ValueError):
        generate("instance", seed=0, n=0)
    with pytest.raises(ValueError):
        generate("scenario", seed=0, n=2, m=2, horizon=10**5)


def test_solve_report(tmp_path):
    path = write(tmp_path, "i.txt", "2 2 min\n1 2\n4 3\n")
    code, out, err = run(["solve", path])
    assert code == 0, err
    rep = json.loads(out)
    assert rep["values"]["value"] == "4"
    assert rep["certificate"]["dual_gap"] == "0"
    assert rep["matching"] == [[0, 0], [1, 1]]
    assert rep["digest"].startswith("sha256:")


@pytest.mark.parametrize(
    "args, value",
    [
        (["--objective", "bottleneck"], "3"),
        (["--objective", "fair"], "2"),
        (["--objective", "ksum:1"], "3"),
        (["--method", "auction"], "4"),
        (["--method", "auction-scaled"], "4"),
    ],
)
def test_solve_objectives(tmp_path, args, value):
    path = write(tmp_path, "i.txt", "2 2 min\n1 2\n4 3\n")
    code, out, err = run(["solve", path, *args])
    assert code == 0, err
    assert json.loads(out)["values"]["value"] == value


def test_solve_matches_oracle_cli(tmp_path):
    path = write(tmp_path, "i.txt", "3 3 min\n4 1 3\n2 0 5\n3 2 2\n")
    solved = json.loads(run(["solve", path])[1])
    oracle = json.loads(run(["oracle", path, "--all-optima"])[1])
    assert solved["values"]["value"] == oracle["values"]["value"] == "5"
    assert solved["matching"] in oracle["optima"]


def test_cbaa_report_has_zero_conflicts(tmp_path):
    inst = write(tmp_path, "i.txt", "3 3 max\n5 1 2\n3 9 1\n2 2 7\n")
    topo = tmp_path / "t.json"
    run(["generate", "topology", "--n", "3", "--topology", "line", "--out", str(topo)])
    log = tmp_path / "log.jsonl"
    code, out, err = run(["simulate", "--protocol", "cbaa", "--instance", inst, "--topology", str(topo), "--log", str(log)])
    assert code == 0, err
    rep = json.loads(out)
    assert rep["values"]["conflicts_open"] == 0
    assert rep["values"]["rounds"] >= 1
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(records) == rep["values"]["rounds"]
    assert all(len(r["digests"]) == 3 for r in records)


def test_repeated_run_identical_body(tmp_path):
    sc = tmp_path / "sc.json"
    run(["generate", "scenario", "--n", "3", "--m", "3", "--horizon", "3", "--seed", "2", "--out", str(sc)])
    bodies = []
    out = tmp_path / "r.json"
    for _ in range(2):
        code, _, err = run(["run-scenario", str(sc), "--clairvoyant", "--out", str(out)])
        assert code == 0, err
        bodies.append(strip_wall_time(out.read_text()))
    assert bodies[0] == bodies[1]


def test_run_scenario_csv(tmp_path):
    sc = tmp_path / "sc.json"
    run(["generate", "scenario", "--n", "2", "--m", "2", "--horizon", "2", "--out", str(sc)])
    csv_path = tmp_path / "p.csv"
    code, _, _ = run(["run-scenario", str(sc), "--csv", str(csv_path)])
    assert code == 0
    assert csv_path.read_text().splitlines()[0] == "period,assignments,period_value,stranded_tasks"


@pytest.mark.parametrize(
    "content, argv_tail, code, prefix",
    [
        ("2 2 min\n1 2 3\n4 3\n", [], 2, "ERR_PARSE"),
        ("2 2 min\n1 2\n4 3\nFORBID\n0 0\n0 1\n", [], 3, "ERR_INFEASIBLE"),
    ],
)
def test_error_codes(tmp_path, content, argv_tail, code, prefix):
    path = write(tmp_path, "i.txt", content)
    got, out, err = run(["solve", path, *argv_tail])
    assert got == code and out == ""
    assert err.startswith(prefix + ":") and err.count("\n") == 1


def test_guard_and_usage_errors(tmp_path):
    big = write(tmp_path, "big.txt", "10 10 min\n" + "1 " * 10 + "\n" + ("0 " * 10 + "\n") * 9)
    code, _, err = run(["oracle", big])
    assert code == 4 and err.startswith("ERR_GUARD")
    code, _, err = run(["solve"])
    assert code == 2 and err.startswith("ERR_USAGE")
    code, _, err = run(["solve", str(tmp_path / "missing.txt")])
    assert code != 0 and err.startswith("ERR_")


def test_validate_trajectory_failure(tmp_path):
    sc = tmp_path / "sc.json"
    io.emit_scenario(Scenario.build(2, [1], [1, 2], [[[3, 10]], [[3, 10]]]), sc)
    traj_path = tmp_path / "traj.json"
    assert run(["run-scenario", str(sc), "--trajectory", str(traj_path)])[0] == 0
    code, out, _ = run(["validate", str(sc), "--trajectory", str(traj_path)])
    assert code == 0 and json.loads(out)["values"]["passed"] is True
    obj = json.loads(traj_path.read_text())
    obj["alpha"] = [[1, 1]]
    traj_path.write_text(json.dumps(obj))
    code, out, err = run(["validate", str(sc), "--trajectory", str(traj_path)])
    assert code == 1 and err.startswith("ERR_CONSTRAINT")
    assert json.loads(out)["certificate"]["conservation"]["first_violation"] == ["alpha", 0, 2]


def test_batch_mode(tmp_path):
    inst = write(tmp_path, "i.txt", "2 2 min\n1 2\n4 3\n")
    bad = write(tmp_path, "b.txt", "2 2 min\n1\n")
    listing = write(tmp_path, "list.txt", f"solve {inst}\n# skipped\nsolve {bad}\noracle {inst}\n")
    code, out, _ = run(["--batch", listing, "--jobs", "3"])
    assert code == 2
    assert out.count("== [") == 3
    assert "exit=0" in out and "ERR_PARSE" in out
