import copy
import json
import os

import numpy as np
import pytest

from reachnav import create_app
from reachnav.config import Config
from reachnav.geometry import VPolytope, box_vertices
from reachnav.planner import Arena, PlannerParams, Scenario
from reachnav.reachability import ControlBox, LinearSystem

FIXTURES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")

SMALL_CONFIG = {
    "arena": {"min": [-0.25, -0.25, -0.25], "max": [2.25, 2.25, 2.25]},
    "robot": {"source": "box", "half_extents": [0.1, 0.1, 0.1]},
    "start": {"position": [0.0, 0.0, 0.0], "velocity": [0.0, 0.0, 0.0]},
    "goal": {"source": "box", "center": [2.0, 2.0, 2.0], "half_extents": [0.2, 0.2, 0.2]},
    "obstacles": {"mode": "explicit", "list": [{"min": [0.8, 1.6, 0.0], "max": [1.2, 2.2, 0.4]}]},
    "dynamics": {"mass": 1.0, "force_limits": [1.5, 1.5, 1.5]},
    "planner": {
        "dt": 0.05, "lookahead": 0.5, "horizon_steps": 20, "facet_directions": 26,
        "goal_tol": 0.0, "safety_margin": 0.05, "max_sim_time": 10.0, "max_speed": 1.2,
    },
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def small_config():
    return copy.deepcopy(SMALL_CONFIG)


@pytest.fixture
def small_scenario_path(tmp_path, small_config):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_config))
    return str(path)


@pytest.fixture
def double_integrator():
    return LinearSystem.double_integrator(3)


def make_scenario(obstacles=(), goal_center=(2.0, 2.0, 2.0), goal_half=0.2, robot_half=0.1,
                  arena=((-0.25,) * 3, (2.25,) * 3), start=(0.0, 0.0, 0.0), velocity=(0.0, 0.0, 0.0),
                  **params):
    """Directly assembled scenario (no JSON) for planner tests."""
    centre = np.asarray(goal_center, dtype=float)
    defaults = dict(dt=0.05, lookahead=0.5, horizon_steps=20, max_sim_time=10.0, max_speed=1.2)
    defaults.update(params)
    return Scenario(
        arena=Arena(*arena),
        obstacles=[box_vertices(lo, hi) for lo, hi in obstacles],
        goal=box_vertices(centre - goal_half, centre + goal_half),
        robot=box_vertices([-robot_half] * 3, [robot_half] * 3),
        x0=VPolytope([list(start) + list(velocity)]),
        system=LinearSystem.double_integrator(3),
        u_box=ControlBox.symmetric([1.5, 1.5, 1.5]),
        params=PlannerParams(**defaults),
    )


class _TestConfig(Config):
    TESTING = True
    FIXTURES_DIR = FIXTURES_DIR


@pytest.fixture
def client():
    app = create_app(_TestConfig)
    with app.test_client() as test_client:
        yield test_client
