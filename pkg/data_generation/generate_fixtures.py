# data_generation/generate_fixtures.py
# Writes the synthetic PLY clouds and the named scenario fixtures into fixtures/.
# Clouds are integer lattices clipped to ellipsoids, so every coordinate is an exact
# multiple of the lattice spacing and the files are reproducible byte for byte.

import json
import os

import numpy as np

from reachnav.config import Config
from reachnav.geometry import PointCloud
from reachnav.pointcloud import write_ply

LATTICE = 0.05

ARENA = {"min": [-0.25, -0.25, -0.25], "max": [7.75, 7.75, 7.75]}
START = {"position": [0.0, 0.0, 0.0], "velocity": [0.0, 0.0, 0.0]}
DYNAMICS = {"mass": 1.0, "force_limits": [1.5, 1.5, 1.5]}
PLANNER = {
    "dt": 0.05, "lookahead": 0.5, "horizon_steps": 30, "facet_directions": 26,
    "goal_tol": 0.0, "safety_margin": 0.05, "max_sim_time": 30.0, "max_speed": 1.2,
}
BOX_ROBOT = {"source": "box", "half_extents": [0.15, 0.15, 0.15]}
BOX_GOAL = {"source": "box", "center": [7.5, 7.5, 7.5], "half_extents": [0.25, 0.25, 0.25]}


def ellipsoid_lattice(semi_axes):
    """Lattice points i*LATTICE with sum (i_k / a_k)^2 <= 1, tested in integers."""
    a, b, c = semi_axes
    weights = (b * b * c * c, a * a * c * c, a * a * b * b)
    bound = a * a * b * b * c * c
    points = []
    for i in range(-a, a + 1):
        for j in range(-b, b + 1):
            for k in range(-c, c + 1):
                if weights[0] * i * i + weights[1] * j * j + weights[2] * k * k <= bound:
                    points.append((i * LATTICE, j * LATTICE, k * LATTICE))
    return PointCloud(np.array(points))


def cube_ply(half=0.15):
    """Cube corners, centre and face centres, with colour columns the parser ignores."""
    rows = []
    for x in (-half, half):
        for y in (-half, half):
            for z in (-half, half):
                rows.append((x, y, z, 200, 60, 60))
    rows.append((0.0, 0.0, 0.0, 255, 255, 255))
    for axis in range(3):
        for sign in (-half, half):
            p = [0.0, 0.0, 0.0]
            p[axis] = sign
            rows.append((*p, 60, 60, 200))
    lines = [
        "ply", "format ascii 1.0", "comment unit cube fixture",
        f"element vertex {len(rows)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    lines += ["%.9g %.9g %.9g %d %d %d" % r for r in rows]
    return ("\n".join(lines) + "\n").encode("ascii")


def scenario(robot, goal, obstacles):
    return {
        "arena": ARENA, "robot": robot, "start": START, "goal": goal,
        "obstacles": obstacles, "dynamics": DYNAMICS, "planner": PLANNER,
    }


def blocked_walls(low=6.6, thickness=0.2, high=7.75):
    inner = low + thickness
    return [
        {"min": [low, low, low], "max": [inner, high, high]},
        {"min": [low, low, low], "max": [high, inner, high]},
        {"min": [low, low, low], "max": [high, high, inner]},
    ]


def random_obstacles(count, seed):
    return {"mode": "random", "count": count, "size_range": [0.5, 2.0], "seed": seed}


def write_fixtures(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    clouds = {
        "cube.ply": cube_ply(),
        "robot_cloud.ply": write_ply(ellipsoid_lattice((4, 3, 2)), comment="synthetic robot export"),
        "goal_cloud.ply": write_ply(ellipsoid_lattice((5, 4, 3)), comment="synthetic goal export"),
    }
    for name, data in clouds.items():
        with open(os.path.join(out_dir, name), "wb") as handle:
            handle.write(data)
        print(f"Wrote {name}")

    blocked = scenario(BOX_ROBOT, BOX_GOAL, {"mode": "explicit", "list": blocked_walls()})
    blocked["planner"] = {**PLANNER, "max_sim_time": 8.0}
    scenarios = {
        "paper_setup_8.json": scenario(BOX_ROBOT, BOX_GOAL, random_obstacles(8, 8)),
        "paper_fig6_6obs.json": scenario({"source": "ply", "ply_path": "robot_cloud.ply"}, BOX_GOAL,
                                         random_obstacles(6, 6)),
        "paper_fig7_10obs.json": scenario(BOX_ROBOT, {"source": "ply", "ply_path": "goal_cloud.ply",
                                                      "center": [7.5, 7.5, 7.5]},
                                          random_obstacles(10, 10)),
        "blocked_goal.json": blocked,
    }
    for name, doc in scenarios.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2)
            handle.write("\n")
        print(f"Wrote {name}")


if __name__ == '__main__':
    write_fixtures(Config.FIXTURES_DIR)
