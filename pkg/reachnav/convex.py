# reachnav/convex.py
# Small convex-optimization toolbox: LP feasibility of halfspace systems, projection
# onto H-polytopes and polytope-polytope distance.

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, nnls

from .config import TOLERANCES
from .errors import (
    DimensionMismatch,
    EmptyPolytope,
    SolverError,
    Unbounded,
    UnboundedPolytope,
)
from .geometry import HPolytope, VPolytope

logger = logging.getLogger(__name__)

_LP_OPTIONS = {"presolve": True}


class FeasibilityStatus(enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class FeasibilityResult:
    status: FeasibilityStatus
    witness: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.status is FeasibilityStatus.FEASIBLE


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    closest_a: np.ndarray
    closest_b: np.ndarray


def _system(normals, offsets):
    A = np.array(normals, dtype=float, ndmin=2)
    b = np.array(offsets, dtype=float).reshape(-1)
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"{A.shape[0]} normals but {b.shape[0]} offsets")
    return A, b


def _chebyshev_lp(A, b, bounds, radius_cap):
    dim = A.shape[1]
    row_norms = np.linalg.norm(A, axis=1)
    cost = np.zeros(dim + 1)
    cost[-1] = -1.0
    return linprog(
        cost,
        A_ub=np.hstack([A, row_norms[:, None]]),
        b_ub=b,
        bounds=list(bounds) + [(0.0, radius_cap)],
        method="highs",
        options=_LP_OPTIONS,
    )


# --- LP helpers ---
def chebyshev_center(normals, offsets):
    """Centre and radius of the largest ball inside {x : normals @ x <= offsets}."""
    A, b = _system(normals, offsets)
    res = _chebyshev_lp(A, b, [(None, None)] * A.shape[1], None)
    if res.status == 2:
        raise EmptyPolytope("halfspace system is empty")
    if res.status == 3:
        raise UnboundedPolytope("halfspace system contains arbitrarily large balls")
    if res.status != 0:
        raise SolverError(f"Chebyshev LP failed: {res.message}")
    return res.x[:-1], float(res.x[-1])


def lp_support(normals, offsets, direction) -> float:
    A, b = _system(normals, offsets)
    c = np.asarray(direction, dtype=float).reshape(-1)
    res = linprog(-c, A_ub=A, b_ub=b, bounds=[(None, None)] * A.shape[1],
                  method="highs", options=_LP_OPTIONS)
    if res.status == 2:
        raise EmptyPolytope("halfspace system is empty")
    if res.status == 3:
        raise UnboundedPolytope(f"support unbounded in direction {c.tolist()}")
    if res.status != 0:
        raise SolverError(f"support LP failed: {res.message}")
    return float(-res.fun)


def _axis_directions(dim):
    eye = np.eye(dim)
    return np.vstack([eye, -eye])


def check_bounded_nonempty(normals, offsets):
    """Raise EmptyPolytope / UnboundedPolytope unless the system is a bounded nonempty set."""
    chebyshev_center(normals, offsets)
    for axis in _axis_directions(np.shape(normals)[1]):
        lp_support(normals, offsets, axis)


def lp_feasible(normals, offsets, box=None) -> FeasibilityResult:
    """Feasibility of a stacked halfspace system.

    `box` = (lower, upper) appends arena bounds. Without a box the system must be
    bounded along every coordinate axis, otherwise Unbounded is raised.
    """
    A, b = _system(normals, offsets)
    dim = A.shape[1]
    if box is None:
        bounds = [(None, None)] * dim
    else:
        lower, upper = (np.asarray(v, dtype=float).reshape(-1) for v in box)
        if lower.size != dim or upper.size != dim:
            raise DimensionMismatch("box bounds do not match the system dimension")
        bounds = list(zip(lower.tolist(), upper.tolist()))

    # a capped Chebyshev ball keeps the witness away from the boundary when possible
    res = _chebyshev_lp(A, b, bounds, 1.0)
    if res.status == 2:
        return FeasibilityResult(FeasibilityStatus.INFEASIBLE)
    if res.status != 0:
        raise SolverError(f"feasibility LP failed: {res.message}")

    if box is None:
        for axis in _axis_directions(dim):
            ray = linprog(-axis, A_ub=A, b_ub=b, bounds=bounds, method="highs",
                          options=_LP_OPTIONS)
            if ray.status == 3:
                raise Unbounded(f"system unbounded along {axis.tolist()}; supply an arena box")
    witness = res.x[:-1]
    violation = float(np.max(A @ witness - b))
    if violation > TOLERANCES.feasibility:
        raise SolverError(f"LP witness violates constraints by {violation:.3e}")
    return FeasibilityResult(FeasibilityStatus.FEASIBLE, witness)


# --- Projection ---
def project_point(x, h: HPolytope) -> DistanceResult:
    """Euclidean projection of x onto h.

    Solved as a least-distance program through its non-negative least-squares dual
    (an active-set method), so the result is exact up to round-off.
    """
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.shape[0] != h.dim:
        raise DimensionMismatch(f"point has dimension {point.shape[0]}, polytope {h.dim}")
    residual = h.normals @ point - h.offsets
    if np.all(residual <= TOLERANCES.projection):
        return DistanceResult(0.0, point.copy(), point.copy())

    # min ||y|| s.t. G y >= g with y = proj - x, G = -normals, g = residual
    dim = h.dim
    E = np.vstack([-h.normals.T, residual[None, :]])
    f = np.zeros(dim + 1)
    f[-1] = 1.0
    weights, _ = nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ weights - f
    if abs(r[-1]) <= 1e-14 or np.linalg.norm(r) <= 1e-12:
        raise EmptyPolytope("cannot project onto an empty polytope")
    step = -r[:-1] / r[-1]
    projection = point + step
    return DistanceResult(float(np.linalg.norm(step)), point.copy(), projection)


# --- Polytope distance (GJK) ---
def _closest_on_simplex(points):
    """Closest point to the origin on conv(points), by enumerating faces."""
    best = None
    k = points.shape[0]
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(k), size):
            face = points[list(subset)]
            if size == 1:
                lam = np.ones(1)
            else:
                span = (face[1:] - face[0]).T
                mu = np.linalg.lstsq(span, -face[0], rcond=None)[0]
                lam = np.concatenate([[1.0 - mu.sum()], mu])
                if lam.min() < -1e-12:
                    continue
                lam = np.clip(lam, 0.0, None)
                lam /= lam.sum()
            q = lam @ face
            dist = float(q @ q)
            if best is None or dist < best[0] - 1e-18:
                best = (dist, list(subset), lam, q)
    return best


def polytope_distance(a: VPolytope, b: VPolytope) -> DistanceResult:
    """Distance between two V-polytopes with GJK over the Minkowski difference A - B."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"cannot compare polytopes of dimension {a.dim} and {b.dim}")
    va, vb = a.vertices, b.vertices
    scale = max(1.0, float(np.abs(va).max()), float(np.abs(vb).max()))
    zero_sq = (1e-12 * scale) ** 2

    pairs = [(0, 0)]
    lam = np.ones(1)
    v = va[0] - vb[0]
    vv = float(v @ v)
    for _ in range(TOLERANCES.gjk_max_iter):
        if vv <= zero_sq:
            break
        ia = int(np.argmin(va @ v))
        ib = int(np.argmax(vb @ v))
        w = va[ia] - vb[ib]
        if vv - float(v @ w) <= 1e-12 * vv or (ia, ib) in pairs:
            break
        candidate = pairs + [(ia, ib)]
        simplex = np.array([va[i] - vb[j] for i, j in candidate])
        dist, keep, new_lam, q = _closest_on_simplex(simplex)
        if dist >= vv:
            break
        pairs = [candidate[i] for i in keep]
        lam, v, vv = new_lam, q, dist
        if len(pairs) > a.dim:
            # full simplex around the origin
            if vv <= zero_sq:
                break

    closest_a = sum(w_ * va[i] for w_, (i, _) in zip(lam, pairs))
    closest_b = sum(w_ * vb[j] for w_, (_, j) in zip(lam, pairs))
    if vv <= zero_sq:
        midpoint = 0.5 * (closest_a + closest_b)
        return DistanceResult(0.0, midpoint, midpoint.copy())
    return DistanceResult(float(np.sqrt(vv)), np.asarray(closest_a), np.asarray(closest_b))
