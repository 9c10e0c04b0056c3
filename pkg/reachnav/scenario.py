# reachnav/scenario.py
# Scenario JSON schema, world resolution (boxes, PLY hulls, seeded obstacles) and
# round-trip serialization.

from __future__ import annotations

import dataclasses
import logging
import os
from typing import Annotated, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import TOLERANCES
from .convex import polytope_distance
from .errors import InvalidScenario, PlacementFailure, SchemaError
from .geometry import VPolytope, bounding_box, box_vertices, convex_hull
from .planner import Arena, PlannerParams, Scenario
from .pointcloud import read_ply, voxel_downsample
from .reachability import ControlBox, LinearSystem
from .utils import read_json

logger = logging.getLogger(__name__)

MAX_REJECTIONS = 10_000
KEEPOUT_CLEARANCE = 1.0

Real = Annotated[float, Field(allow_inf_nan=False)]
PositiveReal = Annotated[float, Field(gt=0, allow_inf_nan=False)]
Vec3 = Annotated[List[Real], Field(min_length=3, max_length=3)]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# --- Schema ---
class BoxConfig(_Block):
    lower: Vec3 = Field(alias="min")
    upper: Vec3 = Field(alias="max")

    @model_validator(mode="after")
    def _ordered(self):
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("min must be strictly below max on every axis")
        return self


class RobotConfig(_Block):
    source: Literal["box", "ply"]
    half_extents: Optional[Vec3] = None
    ply_path: Optional[str] = None
    voxel: Optional[PositiveReal] = None

    @model_validator(mode="after")
    def _source_fields(self):
        if self.source == "box" and self.half_extents is None:
            raise ValueError("box robot requires half_extents")
        if self.source == "ply" and not self.ply_path:
            raise ValueError("ply robot requires ply_path")
        if self.half_extents is not None and any(h < 0 for h in self.half_extents):
            raise ValueError("half_extents must be non-negative")
        return self


class StartConfig(_Block):
    position: Vec3
    velocity: Vec3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class GoalConfig(_Block):
    source: Literal["box", "ply"]
    center: Optional[Vec3] = None
    half_extents: Optional[Vec3] = None
    ply_path: Optional[str] = None

    @model_validator(mode="after")
    def _source_fields(self):
        if self.source == "box" and (self.center is None or self.half_extents is None):
            raise ValueError("box goal requires center and half_extents")
        if self.source == "ply" and not self.ply_path:
            raise ValueError("ply goal requires ply_path")
        if self.half_extents is not None and any(h <= 0 for h in self.half_extents):
            raise ValueError("goal half_extents must be positive")
        return self


class ObstaclesConfig(_Block):
    mode: Literal["explicit", "random"]
    boxes: Optional[List[BoxConfig]] = Field(default=None, alias="list")
    count: Optional[Annotated[int, Field(ge=0)]] = None
    size_range: Optional[Annotated[List[PositiveReal], Field(min_length=2, max_length=2)]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _mode_fields(self):
        if self.mode == "explicit" and self.boxes is None:
            raise ValueError("explicit obstacles require list")
        if self.mode == "random":
            missing = [k for k in ("count", "size_range", "seed") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"random obstacles require {', '.join(missing)}")
            if self.size_range[0] > self.size_range[1]:
                raise ValueError("size_range must be ordered")
        return self


class DynamicsConfig(_Block):
    mass: PositiveReal
    force_limits: Annotated[List[PositiveReal], Field(min_length=3, max_length=3)]


class PlannerConfig(_Block):
    dt: PositiveReal
    lookahead: PositiveReal
    horizon_steps: Annotated[int, Field(ge=1)]
    facet_directions: Annotated[int, Field(ge=1)]
    goal_tol: Annotated[float, Field(ge=0, allow_inf_nan=False)]
    safety_margin: PositiveReal
    max_sim_time: PositiveReal
    seed: Optional[int] = None
    max_speed: Optional[PositiveReal] = None
    reach_dt: Optional[PositiveReal] = None
    control_weight: Optional[PositiveReal] = None
    tube_samples: Optional[Annotated[int, Field(ge=1)]] = None


class PlannerOverrides(_Block):
    """Partial planner block accepted by `plan --params`."""
    dt: Optional[PositiveReal] = None
    lookahead: Optional[PositiveReal] = None
    horizon_steps: Optional[Annotated[int, Field(ge=1)]] = None
    facet_directions: Optional[Annotated[int, Field(ge=1)]] = None
    goal_tol: Optional[Annotated[float, Field(ge=0, allow_inf_nan=False)]] = None
    safety_margin: Optional[PositiveReal] = None
    max_sim_time: Optional[PositiveReal] = None
    seed: Optional[int] = None
    max_speed: Optional[PositiveReal] = None
    reach_dt: Optional[PositiveReal] = None
    control_weight: Optional[PositiveReal] = None
    tube_samples: Optional[Annotated[int, Field(ge=1)]] = None


class ScenarioConfig(_Block):
    arena: BoxConfig
    robot: RobotConfig
    start: StartConfig
    goal: GoalConfig
    obstacles: ObstaclesConfig
    dynamics: DynamicsConfig
    planner: PlannerConfig


def _schema_error(exc: ValidationError) -> SchemaError:
    lines = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()]
    return SchemaError("; ".join(lines))


def parse_config(doc) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise _schema_error(exc) from exc


# --- World generation ---
def gen_random_obstacles(seed: int, count: int, size_range, arena: Arena, keepout=()) -> list:
    """Seeded axis-aligned cuboids clear of every keepout polytope.

    The stream is numpy's PCG64 seeded with `seed`; per candidate three side lengths
    are drawn from size_range, then three uniforms place the lower corner in the span
    that keeps the box inside the arena.
    """
    if count < 0:
        raise InvalidScenario("obstacle count must be non-negative")
    lo_size, hi_size = (float(s) for s in size_range)
    span = arena.upper - arena.lower
    if not 0 < lo_size <= hi_size or np.any(hi_size > span):
        raise InvalidScenario(f"size_range {list(size_range)} does not fit the arena")
    rng = np.random.Generator(np.random.PCG64(seed))
    obstacles = []
    rejections = 0
    while len(obstacles) < count:
        size = rng.uniform(lo_size, hi_size, size=3)
        corner = arena.lower + rng.uniform(0.0, 1.0, size=3) * (span - size)
        candidate = box_vertices(corner, corner + size)
        if any(polytope_distance(candidate, k).distance <= TOLERANCES.distance for k in keepout):
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise PlacementFailure(
                    f"placed {len(obstacles)} of {count} obstacles before {MAX_REJECTIONS} rejections")
            continue
        obstacles.append(candidate)
    logger.debug("Generated %d obstacles (seed %d, %d rejections)", count, seed, rejections)
    return obstacles


def _cloud_hull(path, voxel=None) -> VPolytope:
    cloud = read_ply(path).points
    if voxel is not None:
        cloud = voxel_downsample(cloud, voxel)
    vertices, _ = convex_hull(cloud)
    return vertices


def _recentred(poly: VPolytope, center) -> VPolytope:
    lo, hi = bounding_box(poly)
    return VPolytope(poly.vertices - 0.5 * (lo + hi) + np.asarray(center, dtype=float))


def _resolve_path(path, base_dir):
    if base_dir is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def _keepouts(robot: VPolytope, start, goal: VPolytope) -> list:
    lo, hi = bounding_box(robot)
    start = np.asarray(start, dtype=float)
    g_lo, g_hi = bounding_box(goal)
    return [
        box_vertices(start + lo - KEEPOUT_CLEARANCE, start + hi + KEEPOUT_CLEARANCE),
        box_vertices(g_lo + lo - KEEPOUT_CLEARANCE, g_hi + hi + KEEPOUT_CLEARANCE),
    ]


def build_scenario(config: ScenarioConfig, base_dir=None) -> Scenario:
    """Resolve a validated config into geometry, dynamics and planner parameters."""
    arena = Arena(config.arena.lower, config.arena.upper)

    robot_cfg = config.robot
    if robot_cfg.source == "box":
        half = np.asarray(robot_cfg.half_extents)
        robot = box_vertices(-half, half)
    else:
        robot_cfg = robot_cfg.model_copy(update={"ply_path": _resolve_path(robot_cfg.ply_path, base_dir)})
        robot = _recentred(_cloud_hull(robot_cfg.ply_path, robot_cfg.voxel), np.zeros(3))

    goal_cfg = config.goal
    if goal_cfg.source == "box":
        c, h = np.asarray(goal_cfg.center), np.asarray(goal_cfg.half_extents)
        goal = box_vertices(c - h, c + h)
    else:
        goal_cfg = goal_cfg.model_copy(update={"ply_path": _resolve_path(goal_cfg.ply_path, base_dir)})
        goal = _cloud_hull(goal_cfg.ply_path)
        if goal_cfg.center is not None:
            goal = _recentred(goal, goal_cfg.center)

    position = np.asarray(config.start.position, dtype=float)
    velocity = np.asarray(config.start.velocity, dtype=float)
    x0 = VPolytope(np.concatenate([position, velocity])[None, :])

    obs_cfg = config.obstacles
    if obs_cfg.mode == "explicit":
        obstacles = [box_vertices(b.lower, b.upper) for b in obs_cfg.boxes]
    else:
        obstacles = gen_random_obstacles(obs_cfg.seed, obs_cfg.count, obs_cfg.size_range, arena,
                                         _keepouts(robot, position, goal))

    system = LinearSystem.double_integrator(3)
    u_box = ControlBox.from_force_limits(config.dynamics.force_limits, config.dynamics.mass)
    overrides = {k: v for k, v in config.planner.model_dump().items() if v is not None}
    params = PlannerParams(**overrides)

    resolved = config.model_copy(update={"robot": robot_cfg, "goal": goal_cfg})
    scenario = Scenario(arena, obstacles, goal, robot, x0, system, u_box, params, resolved)
    scenario.validate()
    logger.info("Scenario resolved: %d obstacles, robot %d vertices, goal %d vertices",
                len(obstacles), len(robot), len(goal))
    return scenario


def load_scenario(path) -> Scenario:
    config = parse_config(read_json(path))
    return build_scenario(config, base_dir=os.path.dirname(os.path.abspath(path)))


def apply_overrides(base: PlannerParams, doc) -> PlannerParams:
    try:
        overrides = PlannerOverrides.model_validate(doc)
    except ValidationError as exc:
        raise _schema_error(exc) from exc
    return dataclasses.replace(base, **overrides.model_dump(exclude_none=True))


def load_params(path, base: PlannerParams) -> PlannerParams:
    return apply_overrides(base, read_json(path))


# --- Serialization ---
def scenario_to_config(scenario: Scenario) -> ScenarioConfig:
    """Config that reloads into an equal scenario; random obstacles become an explicit list."""
    if scenario.source is None:
        raise InvalidScenario("scenario was not built from a config")
    boxes = []
    for obstacle in scenario.obstacles:
        lo, hi = bounding_box(obstacle)
        boxes.append(BoxConfig(lower=lo.tolist(), upper=hi.tolist()))
    obstacles = ObstaclesConfig(mode="explicit", boxes=boxes)
    return scenario.source.model_copy(update={"obstacles": obstacles})


def scenario_to_json(scenario: Scenario) -> dict:
    return scenario_to_config(scenario).model_dump(mode="json", by_alias=True, exclude_none=True)
