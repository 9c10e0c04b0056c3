import json
import os

import numpy as np
import pytest

from reachnav.cli import EXIT_GOAL_MISSED, EXIT_INVALID, EXIT_OK, main
from reachnav.config import Config
from reachnav.geometry import convex_hull, hull_to_json
from reachnav.pointcloud import read_ply, voxel_downsample
from reachnav.utils import TRAJECTORY_COLUMNS, read_trajectory_csv


def test_hull_command(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "hull.json"
    code = main(["hull", "--input", os.path.join(fixtures_dir, "cube.ply"), "--output", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["normals"]) == 6
    assert len(doc["vertices"]) == 8
    assert "6 facets" in capsys.readouterr().out


def test_hull_command_with_filters(fixtures_dir, tmp_path):
    out = tmp_path / "hull.json"
    code = main(["hull", "--input", os.path.join(fixtures_dir, "goal_cloud.ply"), "--output", str(out),
                 "--voxel", "0.1", "--outlier", "8", "2.0"])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["dim"] == 3


def test_reach_command(small_scenario_path, tmp_path):
    out = tmp_path / "reach.json"
    assert main(["reach", "--scenario", small_scenario_path, "--time", "0.5", "--output", str(out),
                 "--dt", "0.01"]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["normals"]) == 32
    assert doc["time"] == 0.5
    assert len(doc["position_normals"]) == 26


def test_usage_and_input_errors(tmp_path, capsys):
    assert main(["hull", "--bogus"]) == EXIT_INVALID
    assert main([]) == EXIT_INVALID
    code = main(["hull", "--input", str(tmp_path / "missing.ply"), "--output", str(tmp_path / "o.json")])
    assert code == EXIT_INVALID
    assert "IoError" in capsys.readouterr().err


def test_invalid_scenario_exits_with_usage_code(small_config, tmp_path):
    small_config["planner"]["horizon"] = 3
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(small_config))
    assert main(["plan", "--scenario", str(path), "--out", str(tmp_path / "t.csv")]) == EXIT_INVALID


def test_plan_then_verify(small_scenario_path, tmp_path):
    traj_a, traj_b = tmp_path / "a.csv", tmp_path / "b.csv"
    plot = tmp_path / "plot.json"
    report = tmp_path / "report.json"
    assert main(["plan", "--scenario", small_scenario_path, "--out", str(traj_a),
                 "--plot-data", str(plot)]) == EXIT_OK
    assert main(["plan", "--scenario", small_scenario_path, "--out", str(traj_b)]) == EXIT_OK
    assert traj_a.read_bytes() == traj_b.read_bytes()
    assert traj_a.read_text().splitlines()[0] == ",".join(TRAJECTORY_COLUMNS)

    assert main(["verify", "--scenario", small_scenario_path, "--traj", str(traj_a),
                 "--report", str(report)]) == EXIT_OK
    doc = json.loads(report.read_text())
    assert doc["violations"] == []
    assert doc["max_dynamics_residual"] < 1e-6

    data = json.loads(plot.read_text())
    lower, upper = np.array(data["arena"]["min"]), np.array(data["arena"]["max"])
    positions = np.array([sample["position"] for sample in data["trajectory"]])
    assert np.all(positions >= lower) and np.all(positions <= upper)


def test_require_goal_exit_code(small_scenario_path, tmp_path):
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"max_sim_time": 0.2}))
    code = main(["plan", "--scenario", small_scenario_path, "--out", str(tmp_path / "t.csv"),
                 "--params", str(params), "--require-goal"])
    assert code == EXIT_GOAL_MISSED


def test_verify_rejects_malformed_csv(small_scenario_path, tmp_path):
    traj = tmp_path / "bad.csv"
    traj.write_text("t,x,y\n0,0,0\n")
    assert main(["verify", "--scenario", small_scenario_path, "--traj", str(traj),
                 "--report", str(tmp_path / "r.json")]) == EXIT_INVALID


@pytest.mark.slow
def test_plan_shipped_scenario_reaches_goal(fixtures_dir, tmp_path):
    code = main(["plan", "--scenario", os.path.join(fixtures_dir, "paper_setup_8.json"),
                 "--out", str(tmp_path / "t.csv"), "--require-goal"])
    assert code == EXIT_OK


def test_hull_downsamples_by_default(fixtures_dir, tmp_path):
    source = os.path.join(fixtures_dir, "goal_cloud.ply")
    default, explicit, raw = (tmp_path / name for name in ("default.json", "explicit.json", "raw.json"))
    assert main(["hull", "--input", source, "--output", str(default)]) == EXIT_OK
    assert main(["hull", "--input", source, "--output", str(explicit), "--voxel", str(Config.DEFAULT_VOXEL)]) == EXIT_OK
    assert main(["hull", "--input", source, "--output", str(raw), "--no-voxel"]) == EXIT_OK
    assert default.read_text() == explicit.read_text()

    cloud = read_ply(source).points
    expected = json.loads(json.dumps(hull_to_json(*convex_hull(voxel_downsample(cloud, Config.DEFAULT_VOXEL)))))
    assert json.loads(default.read_text()) == expected
    assert json.loads(raw.read_text()) == json.loads(json.dumps(hull_to_json(*convex_hull(cloud))))
    assert main(["hull", "--input", source, "--output", str(raw), "--voxel", "0.1", "--no-voxel"]) == EXIT_INVALID


@pytest.mark.parametrize("outlier", [["4", "0"], ["4", "-1"], ["2.5", "1.0"], ["0", "1.0"]])
def test_hull_rejects_bad_outlier_parameters(fixtures_dir, tmp_path, capsys, outlier):
    code = main(["hull", "--input", os.path.join(fixtures_dir, "goal_cloud.ply"),
                 "--output", str(tmp_path / "hull.json"), "--outlier", *outlier])
    assert code == EXIT_INVALID
    assert "InvalidFilterParams" in capsys.readouterr().err


def test_verify_without_obstacles_writes_strict_json(small_config, tmp_path):
    small_config["obstacles"] = {"mode": "explicit", "list": []}
    small_config["planner"]["max_sim_time"] = 0.3
    scenario = tmp_path / "open.json"
    scenario.write_text(json.dumps(small_config))
    traj, report = tmp_path / "t.csv", tmp_path / "r.json"
    assert main(["plan", "--scenario", str(scenario), "--out", str(traj)]) == EXIT_OK
    assert main(["verify", "--scenario", str(scenario), "--traj", str(traj), "--report", str(report)]) == EXIT_OK

    def reject(token):
        raise ValueError(f"non-standard JSON constant {token}")

    doc = json.loads(report.read_text(), parse_constant=reject)
    assert doc["min_clearance"] is None
    assert doc["violations"] == []
    # the CSV keeps the inf token, which reads back as infinity
    assert all(d.min_clearance == float("inf") for d in read_trajectory_csv(traj).diagnostics)
