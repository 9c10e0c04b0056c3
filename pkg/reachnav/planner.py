# reachnav/planner.py
# Receding-horizon safe navigation: C-space inflation, reach-set safety certificates,
# a convexified obstacle-avoiding QP and an independent post-hoc verifier.

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.linalg import expm

from .config import Config, TOLERANCES
from .convex import lp_feasible, polytope_distance, project_point
from .errors import (
    GeometryError,
    InvalidParams,
    InvalidScenario,
    PlanInfeasible,
    ReachabilityError,
    SolverStall,
)
from .geometry import (
    HPolytope,
    VPolytope,
    bounding_box,
    box_halfspaces,
    convex_hull,
    minkowski_sum,
    reflect,
    translate,
    vertices_from_halfspaces,
)
from .reachability import ControlBox, LinearSystem, ReachPolytope, default_directions, reach_polytope

logger = logging.getLogger(__name__)

BRAKE_SPEED_FLOOR = 1e-9
COLLISION_TOL = 1e-9
VERIFY_SUBSTEPS = 5


# --- Domain types ---
@dataclass(frozen=True, eq=False)
class Arena:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InvalidScenario("arena min must be strictly below max on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def halfspaces(self) -> HPolytope:
        return box_halfspaces(self.lower, self.upper)

    def contains(self, x, tol: float = TOLERANCES.membership) -> bool:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class PlannerParams:
    dt: float = 0.05
    lookahead: float = 0.5
    horizon_steps: int = 10
    facet_directions: int = 26
    goal_tol: float = 0.0
    safety_margin: float = 0.05
    max_sim_time: float = 30.0
    seed: int = 0
    max_speed: float | None = None
    reach_dt: float = 0.01
    control_weight: float = 1e-3
    tube_samples: int = 2
    snapshot_every: int = 10

    def __post_init__(self):
        for name in ("dt", "lookahead", "safety_margin", "max_sim_time", "reach_dt", "control_weight"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"planner parameter '{name}' must be positive")
        for name in ("horizon_steps", "facet_directions", "tube_samples", "snapshot_every"):
            if int(getattr(self, name)) < 1:
                raise InvalidParams(f"planner parameter '{name}' must be a positive integer")
        if self.goal_tol < 0:
            raise InvalidParams("planner parameter 'goal_tol' must be non-negative")
        if self.max_speed is not None and not self.max_speed > 0:
            raise InvalidParams("planner parameter 'max_speed' must be positive")


@dataclass(eq=False)
class Scenario:
    arena: Arena
    obstacles: list
    goal: VPolytope
    robot: VPolytope
    x0: VPolytope
    system: LinearSystem
    u_box: ControlBox
    params: PlannerParams = field(default_factory=PlannerParams)
    source: object = None   # the ScenarioConfig this was resolved from, if any

    @property
    def position_indices(self) -> list:
        return list(self.system.position_indices)

    @property
    def start_state(self) -> np.ndarray:
        return self.x0.vertices.mean(axis=0)

    def goal_halfspaces(self) -> HPolytope:
        return convex_hull(self.goal.vertices)[1]

    def free_box(self):
        """Bounds on the robot reference point that keep the whole robot inside the arena."""
        lo, hi = bounding_box(self.robot)
        return self.arena.lower - lo, self.arena.upper - hi

    def validate(self):
        pos = self.position_indices
        if len(pos) != self.arena.lower.size:
            raise InvalidScenario("system position coordinates do not match the arena dimension")
        for i, obstacle in enumerate(self.obstacles):
            if not self.arena.contains(obstacle.vertices):
                raise InvalidScenario(f"obstacle {i} extends outside the arena")
        if not self.arena.contains(self.goal.vertices):
            raise InvalidScenario("goal extends outside the arena")
        start = self.x0.vertices[:, pos]
        if not self.arena.contains(start):
            raise InvalidScenario("start position lies outside the arena")
        if not self.arena.contains(self.robot.vertices + start.mean(axis=0)):
            raise InvalidScenario("robot at the start position extends outside the arena")
        for i, (inflated, _) in enumerate(build_cspace(self.obstacles, self.robot)):
            if polytope_distance(self.goal, inflated).distance <= TOLERANCES.distance:
                raise InvalidScenario(f"goal touches inflated obstacle {i}")


class Outcome(str, enum.Enum):
    GOAL_REACHED = "GoalReached"
    TIMEOUT = "Timeout"
    INFEASIBLE_STOP = "InfeasibleStop"


@dataclass(frozen=True)
class StepDiagnostics:
    dist_to_goal: float
    min_clearance: float
    safe_cert: bool
    goal_reach_distance: float = float("nan")
    fallback: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    diagnostics: list
    outcome: Outcome | None = None
    reach_snapshots: list = field(default_factory=list)

    def __len__(self):
        return self.times.shape[0]

    @property
    def goal_reached(self) -> bool:
        return self.outcome is Outcome.GOAL_REACHED


# --- Model pieces ---
def discretize(sys: LinearSystem, dt: float) -> list:
    """Exact zero-order-hold (Ad, Bd) for every schedule segment."""
    if not dt > 0:
        raise InvalidParams("discretization step must be positive")
    if sys.segments > 1 and dt > sys.grid_step + 1e-12:
        raise InvalidParams("discretization step exceeds the schedule grid step")
    n, m = sys.dim_state, sys.dim_input
    pairs = []
    for A, B in zip(sys.a_schedule, sys.b_schedule):
        augmented = np.zeros((n + m, n + m))
        augmented[:n, :n] = A
        augmented[:n, n:] = B
        E = expm(augmented * dt)
        pairs.append((E[:n, :n], E[:n, n:]))
    return pairs


def _zoh_at(sys: LinearSystem, pairs, t: float):
    return pairs[sys.segment_index(t)]


def build_cspace(obstacles, robot: VPolytope) -> list:
    """Inflate every obstacle by the reflected robot: O_i + (-S), in both forms."""
    mirrored = reflect(robot)
    cspace = []
    for obstacle in obstacles:
        inflated = minkowski_sum(obstacle, mirrored)
        _, h = convex_hull(inflated.vertices)
        cspace.append((inflated, h))
    return cspace


def _axis_box(facets):
    """Axis-aligned bounds read off the +-e_i facets, or None if any is missing."""
    normals = np.array([f.normal for f in facets])
    offsets = np.array([f.offset for f in facets])
    dim = normals.shape[1]
    lower, upper = np.empty(dim), np.empty(dim)
    for i in range(dim):
        axis = np.zeros(dim)
        axis[i] = 1.0
        up = np.flatnonzero(np.all(np.abs(normals - axis) <= 1e-12, axis=1))
        down = np.flatnonzero(np.all(np.abs(normals + axis) <= 1e-12, axis=1))
        if not up.size or not down.size:
            return None
        upper[i] = offsets[up].min()
        lower[i] = -offsets[down].min()
    return lower, upper


def certify_safe(reach: ReachPolytope, inflated_obstacles, margin: float, boxes=None) -> list:
    """Per obstacle, True when the position reach set misses the margin-grown obstacle.

    `boxes` optionally gives each obstacle's axis-aligned bounds for a quick
    separation test before the LP.
    """
    if not reach.position_facets:
        raise ReachabilityError("reach polytope has no position-subspace facets")
    reach_h = reach.position_polytope()
    reach_box = _axis_box(reach.position_facets)
    verdicts = []
    for i, obstacle in enumerate(inflated_obstacles):
        if reach_box is not None and boxes is not None:
            lo, hi = boxes[i]
            if np.any(reach_box[0] > hi + margin) or np.any(reach_box[1] < lo - margin):
                verdicts.append(True)
                continue
        normals = np.vstack([reach_h.normals, obstacle.normals])
        offsets = np.concatenate([reach_h.offsets, obstacle.offsets + margin])
        verdicts.append(not lp_feasible(normals, offsets, box=reach_box).feasible)
    return verdicts


def min_clearance(robot: VPolytope, position, obstacles) -> float:
    if not obstacles:
        return float("inf")
    body = translate(robot, position)
    return min(polytope_distance(body, obstacle).distance for obstacle in obstacles)


# --- Receding-horizon QP ---
class RecedingHorizonQP:
    """Parametrized QP over N zero-order-hold steps, compiled once and re-solved per step."""

    def __init__(self, scenario: Scenario, cspace, params: PlannerParams):
        sys = scenario.system
        n, m, N = sys.dim_state, sys.dim_input, int(params.horizon_steps)
        pos = scenario.position_indices
        self.scenario, self.params, self.horizon = scenario, params, N
        self.cspace_h = [h for _, h in cspace]
        self.pairs = discretize(sys, params.dt)

        self.X = cp.Variable((n, N + 1))
        self.U = cp.Variable((m, N))
        self.x0 = cp.Parameter(n)
        self.goal = cp.Parameter(len(pos))
        self.Ad = [cp.Parameter((n, n)) for _ in range(N)]
        self.Bd = [cp.Parameter((n, m)) for _ in range(N)]
        self.H = [cp.Parameter((N, len(pos))) for _ in self.cspace_h]
        self.d = [cp.Parameter(N) for _ in self.cspace_h]

        select = np.zeros((len(pos), n))
        select[np.arange(len(pos)), pos] = 1.0
        P = select @ self.X[:, 1:]
        lower, upper = scenario.free_box()

        cost = cp.sum_squares(P[:, -1] - self.goal) + params.control_weight * cp.sum_squares(self.U)
        constraints = [self.X[:, 0] == self.x0]
        constraints += [self.X[:, k + 1] == self.Ad[k] @ self.X[:, k] + self.Bd[k] @ self.U[:, k]
                        for k in range(N)]
        constraints += [self.U >= np.tile(scenario.u_box.lower[:, None], (1, N)),
                        self.U <= np.tile(scenario.u_box.upper[:, None], (1, N))]
        constraints += [P >= np.tile(lower[:, None], (1, N)), P <= np.tile(upper[:, None], (1, N))]
        if params.max_speed is not None and sys.velocity_indices:
            vel = list(sys.velocity_indices)
            vsel = np.zeros((len(vel), n))
            vsel[np.arange(len(vel)), vel] = 1.0
            constraints.append(cp.abs(vsel @ self.X[:, 1:]) <= params.max_speed)
        for H, d in zip(self.H, self.d):
            constraints.append(cp.sum(cp.multiply(H, P.T), axis=1) >= d)
        self.problem = cp.Problem(cp.Minimize(cost), constraints)
        self._select = select

    def rollout(self, state, controls, t0: float) -> np.ndarray:
        sys, dt = self.scenario.system, self.params.dt
        states = [np.asarray(state, dtype=float)]
        for k in range(controls.shape[1]):
            Ad, Bd = _zoh_at(sys, self.pairs, t0 + k * dt)
            states.append(Ad @ states[-1] + Bd @ controls[:, k])
        return np.array(states)

    def solve(self, state, goal_point, warm_start, t0: float = 0.0):
        sys, params, N = self.scenario.system, self.params, self.horizon
        warm = np.zeros((sys.dim_input, N)) if warm_start is None else warm_start
        guess = self.rollout(state, warm, t0)
        guess_positions = guess[1:] @ self._select.T

        self.x0.value = np.asarray(state, dtype=float)
        self.goal.value = np.asarray(goal_point, dtype=float)
        for k in range(N):
            Ad, Bd = _zoh_at(sys, self.pairs, t0 + k * params.dt)
            self.Ad[k].value, self.Bd[k].value = Ad, Bd
        chosen = []
        for h, H, d in zip(self.cspace_h, self.H, self.d):
            # separating facet: the one the warm-start point is furthest outside of
            idx = np.argmax(guess_positions @ h.normals.T - h.offsets, axis=1)
            H.value = h.normals[idx]
            d.value = h.offsets[idx] + params.safety_margin
            chosen.append(idx)

        solver = getattr(cp, Config.QP_SOLVER)
        try:
            self.problem.solve(solver=solver, max_iter=TOLERANCES.qp_max_iter)
        except cp.error.SolverError as exc:
            raise SolverStall(f"QP solver failed: {exc}") from exc
        status = self.problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise PlanInfeasible("no admissible plan satisfies the separating facets")
        if status != cp.OPTIMAL or self.U.value is None:
            raise SolverStall(f"QP solver stopped with status '{status}'")

        controls = scenario_clip(self.scenario.u_box, self.U.value)
        predicted = self.rollout(state, controls, t0)
        return controls, predicted, {"status": status, "objective": float(self.problem.value),
                                     "facets": chosen}


def scenario_clip(u_box: ControlBox, controls) -> np.ndarray:
    return np.clip(controls, u_box.lower[:, None], u_box.upper[:, None])


def _shift(controls):
    return np.hstack([controls[:, 1:], controls[:, -1:]])


def mpc_step(state, scenario: Scenario, cspace, params: PlannerParams, warm_start=None,
             qp: RecedingHorizonQP | None = None, t0: float = 0.0, goal_h: HPolytope | None = None,
             reference=None):
    """One receding-horizon solve; returns (first control, predicted states, diagnostics).

    The terminal target is the projection of `reference` onto the goal (default: the
    goal centroid). The diagnostics carry the full control plan under "controls".
    """
    qp = qp or RecedingHorizonQP(scenario, cspace, params)
    goal_h = goal_h or scenario.goal_halfspaces()
    if reference is None:
        reference = scenario.goal.vertices.mean(axis=0)
    goal_point = project_point(reference, goal_h).closest_b
    controls, predicted, info = qp.solve(state, goal_point, warm_start, t0)
    info["controls"] = controls
    return controls[:, 0].copy(), predicted, info


def _brake(scenario: Scenario, state, dt: float) -> np.ndarray:
    vel = list(scenario.system.velocity_indices)
    if not vel:
        return np.zeros(scenario.system.dim_input)
    return scenario.u_box.clip(-np.asarray(state)[vel] / dt)


def _goal_reach_distance(goal: VPolytope, reach: ReachPolytope) -> float:
    try:
        return polytope_distance(goal, vertices_from_halfspaces(reach.position_polytope())).distance
    except (GeometryError, ReachabilityError):
        return float("nan")


# --- Main loop ---
def run(scenario: Scenario, params: PlannerParams | None = None) -> Trajectory:
    """Receding-horizon loop: goal check, reach tube, certificate, QP (or braking), step."""
    params = params or scenario.params
    scenario.validate()
    sys = scenario.system
    pos = scenario.position_indices
    goal_h = scenario.goal_halfspaces()
    cspace = build_cspace(scenario.obstacles, scenario.robot)
    cspace_h = [h for _, h in cspace]
    boxes = [bounding_box(v) for v, _ in cspace]
    directions = default_directions(sys, params.facet_directions)
    pairs = discretize(sys, params.dt)
    qp = RecedingHorizonQP(scenario, cspace, params)
    tube_offsets = [params.lookahead * (i + 1) / params.tube_samples for i in range(params.tube_samples)]
    logger.info("Planning: %d obstacles, dt=%.3g, lookahead=%.3g, horizon=%d",
                len(scenario.obstacles), params.dt, params.lookahead, params.horizon_steps)

    state = scenario.start_state
    times, states, controls, diagnostics, snapshots = [], [], [], [], []
    warm = None
    k = 0
    outcome = None
    while outcome is None:
        t = k * params.dt
        position = state[pos]
        dist = project_point(position, goal_h).distance
        clearance = min_clearance(scenario.robot, position, scenario.obstacles)
        if dist <= params.goal_tol:
            outcome = Outcome.GOAL_REACHED
        elif t >= params.max_sim_time - 1e-12:
            outcome = Outcome.TIMEOUT
        if outcome is not None:
            times.append(t)
            states.append(state)
            controls.append(np.zeros(sys.dim_input))
            diagnostics.append(StepDiagnostics(dist, clearance, True))
            break

        start = VPolytope(state[None, :])
        tube = [reach_polytope(sys, start, scenario.u_box, t, t + tau, directions, params.reach_dt)
                for tau in tube_offsets]
        verdicts = np.ones(len(cspace_h), dtype=bool)
        for reach in tube:
            verdicts &= np.array(certify_safe(reach, cspace_h, params.safety_margin, boxes), dtype=bool)
        safe = bool(verdicts.all())
        if k % params.snapshot_every == 0:
            snapshots.append((t, tube[-1]))

        fallback = False
        try:
            u, _, info = mpc_step(state, scenario, cspace, params, warm, qp=qp, t0=t, goal_h=goal_h)
            warm = _shift(info["controls"])
        except (PlanInfeasible, SolverStall) as exc:
            speed = float(np.linalg.norm(state[list(sys.velocity_indices)])) if sys.velocity_indices else 0.0
            if speed <= BRAKE_SPEED_FLOOR:
                logger.warning("Plan infeasible at rest (t=%.3f): %s", t, exc)
                outcome = Outcome.INFEASIBLE_STOP
                times.append(t)
                states.append(state)
                controls.append(np.zeros(sys.dim_input))
                diagnostics.append(StepDiagnostics(dist, clearance, safe, _goal_reach_distance(scenario.goal, tube[-1])))
                break
            logger.info("Braking at t=%.3f: %s", t, exc)
            u = _brake(scenario, state, params.dt)
            warm = None
            fallback = True

        times.append(t)
        states.append(state)
        controls.append(u)
        diagnostics.append(StepDiagnostics(dist, clearance, safe,
                                           _goal_reach_distance(scenario.goal, tube[-1]), fallback))
        logger.debug("t=%.3f dist=%.4f clearance=%.4f safe=%s", t, dist, clearance, safe)
        Ad, Bd = _zoh_at(sys, pairs, t)
        state = Ad @ state + Bd @ u
        k += 1

    logger.info("Planning finished: %s after %d steps (t=%.3f)", outcome.value, len(times), times[-1])
    return Trajectory(np.array(times), np.array(states), np.array(controls), diagnostics, outcome, snapshots)


# --- Verification ---
@dataclass
class Violation:
    step: int
    obstacle: int
    depth: float


@dataclass
class VerificationReport:
    violations: list
    max_dynamics_residual: float
    min_clearance: float

    @property
    def collision_free(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "violations": [{"step": v.step, "obstacle": v.obstacle, "depth": v.depth} for v in self.violations],
            "max_dynamics_residual": self.max_dynamics_residual,
            # no obstacles gives infinite clearance, which JSON cannot carry
            "min_clearance": self.min_clearance if math.isfinite(self.min_clearance) else None,
        }


def _box_gap(a, b) -> float:
    gap = np.maximum(0.0, np.maximum(a[0] - b[1], b[0] - a[1]))
    return float(np.linalg.norm(gap))


def verify_trajectory(traj: Trajectory, scenario: Scenario, dt: float | None = None) -> VerificationReport:
    """Independent collision and dynamics check of a logged trajectory."""
    if len(traj) == 0:
        raise InvalidScenario("cannot verify an empty trajectory")
    sys = scenario.system
    pos = scenario.position_indices
    if dt is None:
        dt = float(np.median(np.diff(traj.times))) if len(traj) > 1 else scenario.params.dt
    cspace = build_cspace(scenario.obstacles, scenario.robot)
    obstacle_boxes = [bounding_box(o) for o in scenario.obstacles]
    robot_lo, robot_hi = bounding_box(scenario.robot)

    # sub-sample each interval by linear interpolation
    fractions = np.arange(VERIFY_SUBSTEPS) / VERIFY_SUBSTEPS
    points, owners = [], []
    for k in range(len(traj)):
        if k + 1 < len(traj):
            seg = traj.states[k] + fractions[:, None] * (traj.states[k + 1] - traj.states[k])
        else:
            seg = traj.states[k][None, :]
        points.append(seg[:, pos])
        owners += [k] * seg.shape[0]
    points = np.vstack(points)

    best = float("inf")
    depths = {}
    for p, step in zip(points, owners):
        body_box = (robot_lo + p, robot_hi + p)
        for i, obstacle in enumerate(scenario.obstacles):
            # box gap bounds the distance from below
            gap = _box_gap(body_box, obstacle_boxes[i])
            if gap > COLLISION_TOL and gap >= best:
                continue
            distance = polytope_distance(translate(scenario.robot, p), obstacle).distance
            best = min(best, distance)
            if distance <= COLLISION_TOL:
                depth = max(0.0, float(-np.max(cspace[i][1].slack(p))))
                depths[(step, i)] = max(depths.get((step, i), 0.0), depth)

    residual = 0.0
    if len(traj) > 1:
        pairs = discretize(sys, dt)
        for k in range(len(traj) - 1):
            Ad, Bd = _zoh_at(sys, pairs, traj.times[k])
            predicted = Ad @ traj.states[k] + Bd @ traj.controls[k]
            residual = max(residual, float(np.max(np.abs(traj.states[k + 1] - predicted))))

    violations = [Violation(step, obstacle, depth) for (step, obstacle), depth in sorted(depths.items())]
    if violations:
        logger.warning("Verification found %d collisions", len(violations))
    return VerificationReport(violations, residual, best)


# --- Plot data ---
def plot_data(scenario: Scenario, traj: Trajectory) -> dict:
    cspace = build_cspace(scenario.obstacles, scenario.robot)
    snapshots = []
    for t, reach in traj.reach_snapshots:
        try:
            vertices = vertices_from_halfspaces(reach.position_polytope()).vertices.tolist()
        except (GeometryError, ReachabilityError):
            continue
        snapshots.append({"t": float(t), "vertices": vertices})
    positions = traj.states[:, scenario.position_indices]
    return {
        "arena": {"min": scenario.arena.lower.tolist(), "max": scenario.arena.upper.tolist()},
        "obstacles": [o.vertices.tolist() for o in scenario.obstacles],
        "cspace": [v.vertices.tolist() for v, _ in cspace],
        "goal": scenario.goal.vertices.tolist(),
        "robot": scenario.robot.vertices.tolist(),
        "reach_snapshots": snapshots,
        "trajectory": [{"t": float(t), "position": p.tolist()} for t, p in zip(traj.times, positions)],
        "outcome": traj.outcome.value if traj.outcome else None,
    }
