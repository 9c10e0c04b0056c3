import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from reachnav.errors import InvalidParams, InvalidScenario
from reachnav.geometry import VPolytope, box_halfspaces, box_vertices, translate
from reachnav.convex import polytope_distance
from reachnav.planner import (
    Outcome,
    PlannerParams,
    StepDiagnostics,
    Trajectory,
    _brake,
    build_cspace,
    certify_safe,
    discretize,
    min_clearance,
    mpc_step,
    plot_data,
    run,
    verify_trajectory,
)
from reachnav.reachability import ControlBox, LinearSystem, default_directions, reach_polytope, simulate
from reachnav.scenario import gen_random_obstacles, load_scenario

from .conftest import make_scenario


def _static_trajectory(positions, dt=0.05):
    states = np.hstack([np.asarray(positions, dtype=float), np.zeros((len(positions), 3))])
    diagnostics = [StepDiagnostics(0.0, 0.0, True) for _ in positions]
    return Trajectory(np.arange(len(positions)) * dt, states, np.zeros((len(positions), 3)), diagnostics)


def test_discretize_double_integrator_closed_form():
    (Ad, Bd), = discretize(LinearSystem.double_integrator(1), 0.1)
    assert_allclose(Ad, [[1.0, 0.1], [0.0, 1.0]], atol=1e-14)
    assert_allclose(Bd, [[0.005], [0.1]], atol=1e-14)


def test_discretize_zero_dynamics():
    (Ad, Bd), = discretize(LinearSystem.constant(np.zeros((2, 2)), np.eye(2)), 0.2)
    assert_allclose(Ad, np.eye(2), atol=1e-15)
    assert_allclose(Bd, 0.2 * np.eye(2), atol=1e-15)


def test_discretize_matches_fine_integration(rng):
    A = -np.eye(3) + 0.3 * rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 2))
    sys = LinearSystem.constant(A, B)
    dt = 0.1
    (Ad, Bd), = discretize(sys, dt)
    x0, u = rng.normal(size=3), rng.normal(size=2)
    fine = np.linspace(0.0, dt, 101)
    final = simulate(sys, x0, np.tile(u, (100, 1)), fine)[-1]
    assert np.max(np.abs(final - (Ad @ x0 + Bd @ u))) < 1e-8
    with pytest.raises(InvalidParams):
        discretize(sys, 0.0)


def test_cspace_of_boxes_is_grown_box():
    (inflated, h), = build_cspace([box_vertices([1, 1, 1], [2, 2, 2])], box_vertices([-0.1] * 3, [0.1] * 3))
    assert inflated.same_set(box_vertices([0.9] * 3, [2.1] * 3))
    assert len(h) == 6


def _rest_reach(T=0.5):
    sys = LinearSystem.double_integrator(3)
    box = ControlBox.symmetric([1.5, 1.5, 1.5])
    return sys, box, reach_polytope(sys, VPolytope(np.zeros((1, 6))), box, 0.0, T, default_directions(sys), dt=0.01)


def test_certificate_far_and_enclosing_obstacles():
    _, _, reach = _rest_reach()
    far = box_halfspaces([1, 1, 1], [2, 2, 2])
    around = box_halfspaces([-0.05] * 3, [0.05] * 3)
    assert certify_safe(reach, [far, around], 0.05) == [True, False]
    # margin large enough to reach the far box
    assert certify_safe(reach, [far], 1.0) == [False]


def test_certificate_agrees_with_sampled_rollouts(rng):
    sys, box, reach = _rest_reach()
    steps = len(reach.grid) - 1
    signals = box.lower[None, :, None] + rng.uniform(size=(steps, 3, 2000)) * (box.upper - box.lower)[None, :, None]
    signals = np.where(rng.uniform(size=(1, 3, 2000)) < 0.5, np.sign(signals) * 1.5, signals)
    samples = simulate(sys, np.zeros((6, 2000)), signals, reach.grid)[-1][:3].T
    margin = 0.02
    for _ in range(30):
        centre = rng.uniform(-0.3, 0.3, size=3)
        obstacle = box_halfspaces(centre - 0.03, centre + 0.03)
        safe, = certify_safe(reach, [obstacle], margin)
        inside = np.max(samples @ obstacle.normals.T - obstacle.offsets - margin, axis=1) <= -1e-6
        if safe:
            assert not inside.any()


def test_min_clearance():
    robot = box_vertices([-0.1] * 3, [0.1] * 3)
    assert min_clearance(robot, [0, 0, 0], []) == float("inf")
    assert min_clearance(robot, [0, 0, 0], [box_vertices([1, 0, 0], [2, 1, 1])]) == pytest.approx(0.9, abs=1e-9)


def test_mpc_step_moves_toward_goal():
    scenario = make_scenario()
    state = scenario.start_state
    cspace = build_cspace(scenario.obstacles, scenario.robot)
    u0, predicted, info = mpc_step(state, scenario, cspace, scenario.params)
    goal_centre = scenario.goal.vertices.mean(axis=0)
    assert np.linalg.norm(predicted[-1][:3] - goal_centre) < np.linalg.norm(state[:3] - goal_centre)
    assert np.all(np.abs(u0) <= 1.5 + 1e-12)
    assert info["controls"].shape == (3, scenario.params.horizon_steps)


def test_mpc_plan_respects_chosen_facets():
    scenario = make_scenario(obstacles=[((0.8, 0.8, 0.0), (1.2, 1.2, 2.0))])
    params = scenario.params
    cspace = build_cspace(scenario.obstacles, scenario.robot)
    _, predicted, info = mpc_step(scenario.start_state, scenario, cspace, params)
    _, h = cspace[0]
    idx = info["facets"][0]
    for k in range(params.horizon_steps):
        p = predicted[k + 1][:3]
        assert h.normals[idx[k]] @ p >= h.offsets[idx[k]] + params.safety_margin - 1e-5


def test_brake_opposes_velocity():
    scenario = make_scenario()
    state = np.array([0, 0, 0, 1.0, 0.0, -2.0])
    u = _brake(scenario, state, 0.05)
    assert_allclose(u, [-1.5, 0.0, 1.5])
    (Ad, Bd), = discretize(scenario.system, 0.05)
    after = Ad @ state + Bd @ u
    assert np.linalg.norm(after[3:]) < np.linalg.norm(state[3:])


def test_run_open_arena_reaches_goal():
    scenario = make_scenario()
    traj = run(scenario)
    assert traj.outcome is Outcome.GOAL_REACHED
    assert traj.goal_reached
    assert traj.diagnostics[-1].dist_to_goal == 0.0
    assert np.all(np.abs(traj.controls) <= 1.5 + 1e-12)
    assert_allclose(np.diff(traj.times), scenario.params.dt)
    report = verify_trajectory(traj, scenario)
    assert report.collision_free
    assert report.max_dynamics_residual < 1e-9
    assert traj.reach_snapshots and traj.reach_snapshots[0][0] == 0.0


def test_run_is_deterministic():
    scenario = make_scenario(obstacles=[((0.8, 0.8, 0.0), (1.2, 1.2, 2.0))], max_sim_time=1.0)
    first, second = run(scenario), run(scenario)
    assert_array_equal(first.states, second.states)
    assert_array_equal(first.controls, second.controls)
    assert first.outcome is second.outcome is Outcome.TIMEOUT


def test_plot_data_document():
    scenario = make_scenario(max_sim_time=0.6)
    traj = run(scenario)
    doc = plot_data(scenario, traj)
    assert doc["outcome"] == "Timeout"
    assert len(doc["trajectory"]) == len(traj)
    assert doc["reach_snapshots"][0]["t"] == 0.0
    assert doc["cspace"] == []


def test_verify_reports_planted_collision():
    robot_half = 0.1
    scenario = make_scenario(obstacles=[((1.0, 0.0, 0.0), (1.4, 0.4, 0.4))], robot_half=robot_half)
    far = [0.0, 0.0, 1.5]
    traj = _static_trajectory([far, far, [1.2, 0.2, 0.2], far, far])
    report = verify_trajectory(traj, scenario)
    assert not report.collision_free
    steps = {v.step for v in report.violations}
    assert 2 in steps and steps <= {1, 2}
    planted = next(v for v in report.violations if v.step == 2)
    assert planted.obstacle == 0
    assert planted.depth == pytest.approx(0.3, abs=1e-9)
    assert report.max_dynamics_residual > 0.0


def test_verify_stationary_clearance_matches_distance():
    scenario = make_scenario(obstacles=[((1.0, 0.0, 0.0), (1.4, 0.4, 0.4))])
    traj = _static_trajectory([[0.0, 0.0, 0.0]] * 3)
    report = verify_trajectory(traj, scenario)
    expected = polytope_distance(translate(scenario.robot, [0, 0, 0]), scenario.obstacles[0]).distance
    assert report.collision_free
    assert report.min_clearance == pytest.approx(expected, abs=1e-9)
    assert report.max_dynamics_residual == 0.0
    assert report.to_json()["violations"] == []


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0}, {"horizon_steps": 0}, {"goal_tol": -1.0}, {"max_speed": 0.0}, {"lookahead": -0.5},
])
def test_params_validation(kwargs):
    with pytest.raises(InvalidParams):
        PlannerParams(**kwargs)


def test_scenario_validation():
    touching = make_scenario(obstacles=[((1.5, 1.5, 1.5), (1.85, 2.0, 2.0))])
    with pytest.raises(InvalidScenario):
        run(touching)
    outside = make_scenario(obstacles=[((2.0, 0.0, 0.0), (2.5, 0.5, 0.5))])
    with pytest.raises(InvalidScenario):
        outside.validate()
    with pytest.raises(InvalidScenario):
        make_scenario(start=(3.0, 0.0, 0.0)).validate()


@pytest.mark.slow
@pytest.mark.parametrize("name", ["paper_fig6_6obs.json", "paper_fig7_10obs.json"])
def test_shipped_scenarios_reach_goal_safely(fixtures_dir, name):
    scenario = load_scenario(os.path.join(fixtures_dir, name))
    traj = run(scenario)
    assert traj.outcome is Outcome.GOAL_REACHED
    report = verify_trajectory(traj, scenario)
    assert report.collision_free
    assert report.max_dynamics_residual < 1e-6


@pytest.mark.slow
def test_enclosed_goal_is_not_reached_and_stays_safe(fixtures_dir):
    scenario = load_scenario(os.path.join(fixtures_dir, "blocked_goal.json"))
    traj = run(scenario)
    assert traj.outcome is not Outcome.GOAL_REACHED
    assert verify_trajectory(traj, scenario).collision_free


def test_report_without_obstacles_encodes_clearance_as_null():
    report = verify_trajectory(_static_trajectory([[0.0, 0.0, 0.0]] * 3), make_scenario())
    assert report.min_clearance == float("inf")
    doc = report.to_json()
    assert doc["min_clearance"] is None
    assert json.loads(json.dumps(doc, allow_nan=False)) == doc


CAGE_WALLS = [
    ((1.5, 1.5, 1.5), (1.6, 2.25, 2.25)),
    ((1.5, 1.5, 1.5), (2.25, 1.6, 2.25)),
    ((1.5, 1.5, 1.5), (2.25, 2.25, 1.6)),
]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_walled_goal_with_random_clutter_is_never_reached(seed):
    scenario = make_scenario(obstacles=CAGE_WALLS, max_sim_time=3.0)
    keepout = [box_vertices([-0.45] * 3, [0.45] * 3), box_vertices([1.3] * 3, [2.25] * 3)]
    scenario.obstacles += gen_random_obstacles(seed, 4, (0.1, 0.4), scenario.arena, keepout=keepout)
    traj = run(scenario)
    assert traj.outcome is not Outcome.GOAL_REACHED
    report = verify_trajectory(traj, scenario)
    assert report.collision_free
