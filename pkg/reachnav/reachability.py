# reachnav/reachability.py
# Polytopic reachable sets of linear time-varying systems by facet-wise costate and
# support-point propagation.

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .config import Config, TOLERANCES
from .errors import (
    DimensionMismatch,
    GridMismatch,
    InsufficientDirections,
    InvalidHorizon,
    ReachabilityError,
    ZeroDirection,
)
from .geometry import HPolytope, SupportedFacet, VPolytope, support

logger = logging.getLogger(__name__)


# --- System description ---
@dataclass(frozen=True, eq=False)
class LinearSystem:
    """x' = A(t) x + B(t) u with piecewise-constant A, B on a uniform grid.

    Segment k covers [t_start + k*grid_step, t_start + (k+1)*grid_step); times past
    the last segment reuse it, so a constant system is a one-segment schedule.
    """
    a_schedule: np.ndarray
    b_schedule: np.ndarray
    grid_step: float = 1.0
    t_start: float = 0.0
    position_indices: tuple = ()
    velocity_indices: tuple = ()

    def __post_init__(self):
        a = np.array(self.a_schedule, dtype=float)
        b = np.array(self.b_schedule, dtype=float)
        if a.ndim == 2:
            a = a[None]
        if b.ndim == 2:
            b = b[None]
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise DimensionMismatch("A schedule must hold square matrices")
        if b.ndim != 3 or b.shape[1] != a.shape[1] or b.shape[0] != a.shape[0]:
            raise DimensionMismatch("B schedule must share the grid and row count of A")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ReachabilityError("system matrices must be finite")
        if not self.grid_step > 0:
            raise ReachabilityError("schedule grid step must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_schedule", a)
        object.__setattr__(self, "b_schedule", b)
        object.__setattr__(self, "position_indices", tuple(int(i) for i in self.position_indices))
        object.__setattr__(self, "velocity_indices", tuple(int(i) for i in self.velocity_indices))

    @classmethod
    def constant(cls, A, B, **kwargs) -> "LinearSystem":
        return cls(np.asarray(A, dtype=float)[None], np.asarray(B, dtype=float)[None], **kwargs)

    @classmethod
    def double_integrator(cls, axes: int = 3) -> "LinearSystem":
        """Per-axis double integrator, state [positions, velocities], input = force / mass."""
        A = np.zeros((2 * axes, 2 * axes))
        A[:axes, axes:] = np.eye(axes)
        B = np.zeros((2 * axes, axes))
        B[axes:, :] = np.eye(axes)
        return cls.constant(A, B, position_indices=tuple(range(axes)),
                            velocity_indices=tuple(range(axes, 2 * axes)))

    @property
    def dim_state(self) -> int:
        return self.a_schedule.shape[1]

    @property
    def dim_input(self) -> int:
        return self.b_schedule.shape[2]

    @property
    def segments(self) -> int:
        return self.a_schedule.shape[0]

    def segment_index(self, t: float) -> int:
        k = int(np.floor((t - self.t_start) / self.grid_step))
        return min(max(k, 0), self.segments - 1)

    def matrices(self, t: float):
        k = self.segment_index(t)
        return self.a_schedule[k], self.b_schedule[k]


@dataclass(frozen=True, eq=False)
class ControlBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("control bounds differ in dimension")
        if np.any(lo > hi):
            raise ReachabilityError("control box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, limits) -> "ControlBox":
        lim = np.abs(np.asarray(limits, dtype=float))
        return cls(-lim, lim)

    @classmethod
    def from_force_limits(cls, force_limits, mass: float) -> "ControlBox":
        if not mass > 0:
            raise ReachabilityError("mass must be positive")
        return cls.symmetric(np.asarray(force_limits, dtype=float) / mass)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def scaled(self, alpha: float) -> "ControlBox":
        return ControlBox(self.lower * alpha, self.upper * alpha)

    def clip(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))


@dataclass(frozen=True)
class CostatePath:
    times: np.ndarray
    values: np.ndarray   # (steps + 1, n) or (steps + 1, n, k) for a batch of directions


@dataclass(frozen=True, eq=False)
class ReachPolytope:
    """Outer description of the reachable set at `time` as supported facets."""
    time: float
    facets: tuple
    position_indices: tuple = ()
    position_facets: tuple = ()
    grid: np.ndarray | None = None
    controls: np.ndarray | None = field(default=None, repr=False)        # (steps, m, k)
    initial_points: np.ndarray | None = field(default=None, repr=False)  # (n, k)

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.facets])

    def halfspaces(self) -> HPolytope:
        return HPolytope(self.normals, self.offsets, validate=False)

    def position_polytope(self) -> HPolytope:
        if not self.position_facets:
            raise ReachabilityError("reach polytope has no position-subspace facets")
        return HPolytope([f.normal for f in self.position_facets],
                         [f.offset for f in self.position_facets], validate=False)

    def violation(self, states) -> np.ndarray:
        """Largest facet violation per state (<= 0 means inside)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return (states @ self.normals.T - self.offsets).max(axis=1)


# --- Integration helpers ---
def time_grid(t0: float, T: float, dt: float) -> np.ndarray:
    if not t0 < T:
        raise InvalidHorizon(f"horizon must satisfy t0 < T, got t0={t0}, T={T}")
    if not dt > 0:
        raise InvalidHorizon(f"step must be positive, got {dt}")
    steps = max(1, int(np.ceil((T - t0) / dt - 1e-9)))
    return t0 + (T - t0) * np.arange(steps + 1) / steps


def _rk4_step(A, B, x, u, h):
    drive = 0.0 if B is None else B @ u
    k1 = A @ x + drive
    k2 = A @ (x + 0.5 * h * k1) + drive
    k3 = A @ (x + 0.5 * h * k2) + drive
    k4 = A @ (x + h * k3) + drive
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_input_matrix(A, B, h):
    """Input map of one RK4 step with u held constant: x+ = R x + S u."""
    m = B.shape[1]
    return _rk4_step(A, B, np.zeros((A.shape[0], m)), np.eye(m), h)


def simulate(sys: LinearSystem, x0, controls, times) -> np.ndarray:
    """RK4 replay of piecewise-constant controls; x0 may be (n,) or a batch (n, R)."""
    x = np.array(x0, dtype=float)
    path = [x.copy()]
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        A, B = sys.matrices(times[k] + 0.5 * h)
        x = _rk4_step(A, B, x, controls[k], h)
        path.append(x)
    return np.array(path)


# --- Facet operations ---
def optimal_facet_control(c, B, u_box: ControlBox) -> np.ndarray:
    """Bang-bang maximizer of <B^T c, u> over the box; exact zeros go to the upper bound."""
    c = np.asarray(c, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != c.shape[0] or B.shape[1] != u_box.dim:
        raise DimensionMismatch(
            f"B is {B.shape}, costate {c.shape}, control box dimension {u_box.dim}")
    gain = B.T @ c
    lower, upper = u_box.lower, u_box.upper
    if gain.ndim == 2:
        lower, upper = lower[:, None], upper[:, None]
    return np.where(gain < 0, lower, upper)


def propagate_costate(sys: LinearSystem, c_anchor, t0: float, T: float, dt: float,
                      anchor: str = "terminal") -> CostatePath:
    """Integrate c' = -A^T c with fixed-step RK4.

    anchor="terminal" starts from c(T) and runs backward (the default facet
    parameterization); anchor="initial" starts from c(t0) and runs forward. No
    renormalization is applied.
    """
    times = time_grid(t0, T, dt)
    c = np.array(c_anchor, dtype=float)
    if c.shape[0] != sys.dim_state:
        raise DimensionMismatch(f"costate has dimension {c.shape[0]}, system {sys.dim_state}")
    values = np.empty((times.size,) + c.shape)
    if anchor == "terminal":
        values[-1] = c
        for k in range(times.size - 2, -1, -1):
            h = times[k + 1] - times[k]
            A, _ = sys.matrices(times[k] + 0.5 * h)
            values[k] = _rk4_step(A.T, None, values[k + 1], None, h)
    elif anchor == "initial":
        values[0] = c
        for k in range(times.size - 1):
            h = times[k + 1] - times[k]
            A, _ = sys.matrices(times[k] + 0.5 * h)
            values[k + 1] = _rk4_step(-A.T, None, values[k], None, h)
    else:
        raise ValueError(f"unknown costate anchor '{anchor}'")
    return CostatePath(times, values)


def support_point_on_initial_set(x0: VPolytope, c_at_t0) -> SupportedFacet:
    c = np.asarray(c_at_t0, dtype=float).reshape(-1)
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ZeroDirection("costate at t0 vanishes")
    normal = c / norm
    _, point = support(x0, normal)
    return SupportedFacet(normal, float(normal @ point), point)


def _check_grid(costate: CostatePath, times):
    if costate.times.shape != times.shape or not np.allclose(costate.times, times, rtol=0, atol=1e-12):
        raise GridMismatch("costate path does not share the integration grid")


def _propagate_points(sys, u_box, z0, costate: CostatePath):
    times = costate.times
    z = np.array(z0, dtype=float)
    controls = []
    for k in range(times.size - 1):
        h = times[k + 1] - times[k]
        A, B = sys.matrices(times[k] + 0.5 * h)
        # the bang-bang sign uses the RK4 step's own input map and the end-of-step
        # costate, which makes z an exact maximizer of the discrete scheme
        u = optimal_facet_control(costate.values[k + 1], step_input_matrix(A, B, h), u_box)
        z = _rk4_step(A, B, z, u, h)
        controls.append(u)
    return z, np.array(controls)


def propagate_support_point(sys: LinearSystem, u_box: ControlBox, facet0: SupportedFacet,
                            costate: CostatePath, t0: float, T: float, dt: float) -> SupportedFacet:
    _check_grid(costate, time_grid(t0, T, dt))
    z_final, _ = _propagate_points(sys, u_box, facet0.support_point, costate)
    c_final = costate.values[-1]
    norm = np.linalg.norm(c_final)
    if norm == 0:
        raise ZeroDirection("terminal costate vanishes")
    normal = c_final / norm
    return SupportedFacet(normal, float(normal @ z_final), z_final)


# --- Direction sets ---
def position_sign_vectors(dim: int = 3) -> np.ndarray:
    """Nonzero {-1,0,1}^dim vectors ordered axes -> edges -> corners, normalized."""
    vectors = [v for v in itertools.product((1, 0, -1), repeat=dim) if any(v)]
    vectors.sort(key=lambda v: sum(1 for x in v if x))
    arr = np.array(vectors, dtype=float)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def default_directions(sys: LinearSystem, count: int = 26) -> np.ndarray:
    """Position-subspace sign vectors (first `count`) plus +- the actuated state axes."""
    n = sys.dim_state
    rows = []
    if sys.position_indices:
        signs = position_sign_vectors(len(sys.position_indices))
        if count < len(sys.position_indices) + 1:
            raise InsufficientDirections(f"{count} position directions cannot bound the position set")
        for s in signs[:count]:
            d = np.zeros(n)
            d[list(sys.position_indices)] = s
            rows.append(d)
        axes = list(sys.velocity_indices) or [
            i for i in range(n) if i not in sys.position_indices][:sys.dim_input]
    else:
        axes = list(range(n))
    for i in axes:
        for sign in (1.0, -1.0):
            d = np.zeros(n)
            d[i] = sign
            rows.append(d)
    return np.array(rows)


def _check_positive_span(directions):
    k = directions.shape[0]
    _, sing, vt = np.linalg.svd(directions, full_matrices=False)
    rank = int(np.sum(sing > sing[0] * 1e-10))
    if k < rank + 1:
        raise InsufficientDirections(f"{k} directions cannot positively span a {rank}-dimensional subspace")
    coords = directions @ vt[:rank].T
    if rank == 1:
        if not (coords.min() < 0 < coords.max()):
            raise InsufficientDirections("directions do not positively span their line")
        return
    try:
        hull = ConvexHull(coords)
    except QhullError as exc:
        raise InsufficientDirections(f"directions are degenerate: {exc}") from exc
    if np.any(-hull.equations[:, -1] <= 1e-12):
        raise InsufficientDirections("directions do not positively span their subspace")


# --- Assembled reach sets ---
def reach_polytope(sys: LinearSystem, x0: VPolytope, u_box: ControlBox, t0: float, T: float,
                   directions, dt: float | None = None,
                   parameterization: str = "terminal") -> ReachPolytope:
    """Polytopic outer description of R(T; X0, U), one supported facet per direction.

    With parameterization="terminal" the directions are the facet normals at T; with
    "initial" they are normals at t0 and the reported normals are where they end up.
    """
    dt = Config.REACH_DT if dt is None else dt
    if x0.dim != sys.dim_state:
        raise DimensionMismatch(f"initial set has dimension {x0.dim}, system {sys.dim_state}")
    if u_box.dim != sys.dim_input:
        raise DimensionMismatch(f"control box has dimension {u_box.dim}, system {sys.dim_input}")
    dirs = np.array(directions, dtype=float, ndmin=2)
    if dirs.shape[1] != sys.dim_state:
        raise DimensionMismatch(f"directions have dimension {dirs.shape[1]}, system {sys.dim_state}")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms == 0):
        raise ZeroDirection("facet directions must be nonzero")
    dirs = dirs / norms[:, None]
    _check_positive_span(dirs)

    if parameterization == "terminal":
        costate = propagate_costate(sys, dirs.T, t0, T, dt, anchor="terminal")
    elif parameterization == "initial":
        costate = propagate_costate(sys, dirs.T, t0, T, dt, anchor="initial")
    else:
        raise ValueError(f"unknown parameterization '{parameterization}'")

    # anchor each facet on X0 (ties to the lowest vertex index)
    c0 = costate.values[0]
    z0 = x0.vertices[np.argmax(x0.vertices @ c0, axis=0)].T
    z_final, controls = _propagate_points(sys, u_box, z0, costate)

    c_final = costate.values[-1]
    normals = (c_final / np.linalg.norm(c_final, axis=0)).T
    offsets = np.einsum("kn,nk->k", normals, z_final)
    facets = tuple(SupportedFacet(normals[j], offsets[j], z_final[:, j]) for j in range(dirs.shape[0]))

    pos = list(sys.position_indices)
    others = [i for i in range(sys.dim_state) if i not in pos]
    position_facets = ()
    if pos:
        position_facets = tuple(
            SupportedFacet(f.normal[pos], f.offset, f.support_point[pos])
            for f in facets
            if not others or np.all(np.abs(f.normal[others]) <= 1e-12)
        )
    logger.debug("Reach polytope at T=%.4g: %d facets (%d in position space)",
                 T, len(facets), len(position_facets))
    return ReachPolytope(float(T), facets, tuple(pos), position_facets,
                         costate.times, controls, z0)


def reach_tube(sys: LinearSystem, x0: VPolytope, u_box: ControlBox, t0: float, times,
               directions, dt: float | None = None) -> list:
    times = [float(t) for t in times]
    if not times:
        raise InvalidHorizon("reach tube needs at least one time")
    if any(t <= t0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise InvalidHorizon("tube times must be strictly increasing and after t0")
    return [reach_polytope(sys, x0, u_box, t0, T, directions, dt) for T in times]


def facet_contact_error(reach: ReachPolytope) -> float:
    return max(f.contact_gap() for f in reach.facets)


__all__ = [
    "ControlBox", "CostatePath", "LinearSystem", "ReachPolytope", "TOLERANCES",
    "default_directions", "optimal_facet_control", "propagate_costate",
    "propagate_support_point", "reach_polytope", "reach_tube", "simulate",
    "step_input_matrix", "support_point_on_initial_set", "time_grid",
]
