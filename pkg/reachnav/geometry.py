# reachnav/geometry.py
# Convex polytope kernel: hulls, vertex/halfspace representations, support functions,
# Minkowski sums and the configuration-space helpers built on them.

from __future__ import annotations

import itertools
import logging
from dataclasses import InitVar, dataclass

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .config import Config, TOLERANCES
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    EmptyInput,
    GeometryError,
    ZeroDirection,
)

logger = logging.getLogger(__name__)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


# --- Value objects ---
@dataclass(frozen=True, eq=False)
class VPolytope:
    """Bounded convex set given by a vertex list, shape (n_vertices, dim)."""
    vertices: np.ndarray

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float, ndmin=2)
        if verts.ndim != 2 or verts.shape[0] == 0 or verts.shape[1] == 0:
            raise EmptyInput("VPolytope needs at least one vertex")
        if not np.all(np.isfinite(verts)):
            raise GeometryError("VPolytope vertices must be finite")
        object.__setattr__(self, "vertices", _readonly(verts))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    def same_set(self, other: "VPolytope", tol: float = 1e-9) -> bool:
        """Vertex-set equality up to `tol`, ignoring order."""
        if other.dim != self.dim:
            return False
        gaps = np.linalg.norm(self.vertices[:, None, :] - other.vertices[None, :, :], axis=2)
        return bool(np.all(gaps.min(axis=1) <= tol) and np.all(gaps.min(axis=0) <= tol))


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Bounded convex set {x : normals @ x <= offsets} with unit-norm normals.

    Construction checks non-emptiness and boundedness with small LPs; pass
    validate=False for sets derived from an already validated polytope.
    """
    normals: np.ndarray
    offsets: np.ndarray
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        normals = np.array(self.normals, dtype=float, ndmin=2)
        offsets = np.array(self.offsets, dtype=float).reshape(-1)
        if normals.shape[0] == 0:
            raise EmptyInput("HPolytope needs at least one halfspace")
        if normals.shape[0] != offsets.shape[0]:
            raise DimensionMismatch(
                f"{normals.shape[0]} normals but {offsets.shape[0]} offsets")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise GeometryError("HPolytope data must be finite")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(norms - 1.0) > TOLERANCES.unit_norm):
            raise GeometryError("HPolytope normals must have unit Euclidean norm")
        object.__setattr__(self, "normals", _readonly(normals))
        object.__setattr__(self, "offsets", _readonly(offsets))
        if validate:
            from .convex import check_bounded_nonempty
            check_bounded_nonempty(normals, offsets)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def __len__(self):
        return self.normals.shape[0]

    def slack(self, x) -> np.ndarray:
        """normals @ x - offsets; nonpositive entries are satisfied halfspaces."""
        return self.normals @ np.asarray(x, dtype=float) - self.offsets


@dataclass(frozen=True, eq=False)
class SupportedFacet:
    """Supporting hyperplane <normal, x> = offset touching its set at support_point."""
    normal: np.ndarray
    offset: float
    support_point: np.ndarray

    def __post_init__(self):
        normal = np.array(self.normal, dtype=float).reshape(-1)
        point = np.array(self.support_point, dtype=float).reshape(-1)
        if normal.shape != point.shape:
            raise DimensionMismatch("facet normal and support point differ in dimension")
        object.__setattr__(self, "normal", _readonly(normal))
        object.__setattr__(self, "support_point", _readonly(point))
        object.__setattr__(self, "offset", float(self.offset))

    def contact_gap(self) -> float:
        return abs(float(self.normal @ self.support_point) - self.offset)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        pts = np.atleast_2d(pts)
        if pts.shape[1] != 3:
            raise DimensionMismatch(f"point clouds hold 3-D points, got dimension {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud coordinates must be finite")
        object.__setattr__(self, "points", _readonly(pts))

    def __len__(self):
        return self.points.shape[0]


# --- Hull machinery ---
def _as_points(source) -> np.ndarray:
    if isinstance(source, PointCloud):
        return np.array(source.points)
    if isinstance(source, VPolytope):
        return np.array(source.vertices)
    pts = np.array(source, dtype=float)
    if pts.size == 0:
        raise EmptyInput("no points given")
    return np.atleast_2d(pts)


def _facet_angle(normals, reference):
    # chord-based angle stays accurate for nearly parallel unit vectors
    chord = np.linalg.norm(normals - reference, axis=-1)
    return 2.0 * np.arcsin(np.minimum(1.0, chord / 2.0))


def _merge_coplanar(normals, offsets, points, tol):
    reps, groups = [], []
    for i in range(normals.shape[0]):
        if reps:
            rep_n = np.array([r[0] for r in reps])
            rep_b = np.array([r[1] for r in reps])
            close = (_facet_angle(rep_n, normals[i]) < tol) & \
                (np.abs(rep_b - offsets[i]) <= tol * np.maximum(1.0, np.abs(rep_b)))
            hits = np.flatnonzero(close)
            if hits.size:
                groups[hits[0]].append(i)
                continue
        reps.append((normals[i], offsets[i]))
        groups.append([i])
    merged_n = np.empty((len(groups), normals.shape[1]))
    for g, members in enumerate(groups):
        n = normals[members].mean(axis=0)
        merged_n[g] = n / np.linalg.norm(n)
    # offsets from the points themselves so every input point is contained
    merged_b = (merged_n @ points.T).max(axis=1)
    return merged_n, merged_b


def _hull_facets(points, tol):
    """Extreme-point indices and merged facets of a full-dimensional point set."""
    dim = points.shape[1]
    if dim == 1:
        lo, hi = int(np.argmin(points[:, 0])), int(np.argmax(points[:, 0]))
        normals = np.array([[-1.0], [1.0]])
        offsets = np.array([-points[lo, 0], points[hi, 0]])
        return np.array(sorted({lo, hi})), normals, offsets
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateInput(f"qhull rejected the point set: {exc}") from exc
    normals, offsets = _merge_coplanar(
        hull.equations[:, :-1], -hull.equations[:, -1], points, tol)

    # keep only vertices pinned by `dim` independent facets (drops edge/face interiors)
    candidates = np.asarray(hull.vertices)
    scale = max(1.0, float(np.abs(points).max()))
    tight = np.abs(normals @ points[candidates].T - offsets[:, None]) <= max(1e-9, 2 * tol) * scale
    extreme = [
        idx for col, idx in enumerate(candidates)
        if tight[:, col].sum() >= dim
        and np.linalg.matrix_rank(normals[tight[:, col]], tol=1e-9) == dim
    ]
    return np.array(extreme, dtype=int), normals, offsets


def _affine_rank(points):
    centred = points - points.mean(axis=0)
    if not np.any(centred):
        return 0, None, None
    _, sing, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.sum(sing > sing[0] * 1e-10))
    return rank, centred, vt[:rank]


def _extreme_indices(points, tol):
    """Extreme points of any (possibly flat) point set, found in its affine span."""
    rank, centred, basis = _affine_rank(points)
    if rank == 0:
        return np.array([0])
    if rank == points.shape[1]:
        return _hull_facets(points, tol)[0]
    coords = centred @ basis.T
    return _hull_facets(coords, tol)[0]


def convex_hull(cloud, coplanar_tol: float | None = None):
    """Convex hull of a point cloud or vertex list.

    Returns (VPolytope, HPolytope). Triangulated qhull facets whose normals deviate
    by less than `coplanar_tol` radians (and share an offset) are merged.
    """
    tol = Config.HULL_COPLANAR_TOL if coplanar_tol is None else float(coplanar_tol)
    if tol <= 0:
        raise GeometryError("coplanar_tol must be positive")
    points = _as_points(cloud)
    if points.shape[0] == 0:
        raise EmptyInput("cannot hull an empty point set")
    if not np.all(np.isfinite(points)):
        raise GeometryError("hull input must be finite")
    dim = points.shape[1]
    rank, _, _ = _affine_rank(points)
    if points.shape[0] < dim + 1 or rank < dim:
        raise DegenerateInput(f"points span rank {rank} < dimension {dim}")

    idx, normals, offsets = _hull_facets(points, tol)
    vpoly = VPolytope(points[idx])
    hpoly = HPolytope(normals, offsets, validate=False)
    logger.debug("Hull built: %d facets, %d vertices from %d points",
                 len(hpoly), len(vpoly), points.shape[0])
    return vpoly, hpoly


# --- Operations ---
def _direction(direction, dim):
    c = np.asarray(direction, dtype=float).reshape(-1)
    if c.shape[0] != dim:
        raise DimensionMismatch(f"direction has dimension {c.shape[0]}, polytope {dim}")
    if not np.any(c):
        raise ZeroDirection("support direction must be nonzero")
    return c


def support(p: VPolytope, direction):
    """Support value and maximizing vertex; ties go to the lowest vertex index."""
    c = _direction(direction, p.dim)
    values = p.vertices @ c
    best = int(np.argmax(values))
    return float(values[best]), p.vertices[best].copy()


def support_h(h: HPolytope, direction) -> float:
    from .convex import lp_support
    c = _direction(direction, h.dim)
    return lp_support(h.normals, h.offsets, c)


def minkowski_sum(p: VPolytope, q: VPolytope) -> VPolytope:
    if p.dim != q.dim:
        raise DimensionMismatch(f"cannot add polytopes of dimension {p.dim} and {q.dim}")
    sums = (p.vertices[:, None, :] + q.vertices[None, :, :]).reshape(-1, p.dim)
    sums = np.unique(sums, axis=0)
    return VPolytope(sums[_extreme_indices(sums, Config.HULL_COPLANAR_TOL)])


def reflect(p: VPolytope) -> VPolytope:
    return VPolytope(-p.vertices)


def contains(h: HPolytope, x, tol: float = TOLERANCES.membership):
    """Membership test; accepts one point (returns bool) or a stack of points."""
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != h.dim:
        raise DimensionMismatch(f"point has dimension {pts.shape[-1]}, polytope {h.dim}")
    if pts.ndim == 1:
        return bool(np.all(h.slack(pts) <= tol))
    return np.all(pts @ h.normals.T - h.offsets <= tol, axis=1)


def translate(p, t):
    shift = np.asarray(t, dtype=float).reshape(-1)
    if shift.shape[0] != p.dim:
        raise DimensionMismatch(f"translation has dimension {shift.shape[0]}, polytope {p.dim}")
    if not np.any(shift):
        return p
    if isinstance(p, VPolytope):
        return VPolytope(p.vertices + shift)
    if isinstance(p, HPolytope):
        return HPolytope(p.normals, p.offsets + p.normals @ shift, validate=False)
    raise TypeError(f"cannot translate {type(p).__name__}")


def vertices_from_halfspaces(h: HPolytope) -> VPolytope:
    """Vertex enumeration of a full-dimensional H-polytope."""
    from .convex import chebyshev_center
    if h.dim == 1:
        upper = h.offsets[h.normals[:, 0] > 0] / h.normals[h.normals[:, 0] > 0, 0]
        lower = h.offsets[h.normals[:, 0] < 0] / h.normals[h.normals[:, 0] < 0, 0]
        return VPolytope([[lower.max()], [upper.min()]])
    centre, radius = chebyshev_center(h.normals, h.offsets)
    if radius <= 1e-12:
        raise DegenerateInput("H-polytope has empty interior")
    halfspaces = np.hstack([h.normals, -h.offsets[:, None]])
    try:
        points = HalfspaceIntersection(halfspaces, centre).intersections
    except QhullError as exc:
        raise DegenerateInput(f"halfspace intersection failed: {exc}") from exc
    points = np.unique(points, axis=0)
    return VPolytope(points[_extreme_indices(points, Config.HULL_COPLANAR_TOL)])


def box_vertices(lower, upper) -> VPolytope:
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != hi.shape:
        raise DimensionMismatch("box bounds differ in dimension")
    if np.any(lo > hi):
        raise GeometryError("box lower bound exceeds upper bound")
    corners = [np.where(mask, hi, lo) for mask in itertools.product([False, True], repeat=lo.size)]
    return VPolytope(np.unique(np.array(corners), axis=0))


def box_halfspaces(lower, upper) -> HPolytope:
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    eye = np.eye(lo.size)
    return HPolytope(np.vstack([eye, -eye]), np.concatenate([hi, -lo]), validate=False)


def bounding_box(p: VPolytope):
    return p.vertices.min(axis=0), p.vertices.max(axis=0)


# --- Hull JSON ---
def hull_to_json(vpoly: VPolytope | None, hpoly: HPolytope) -> dict:
    return {
        "dim": int(hpoly.dim),
        "vertices": [] if vpoly is None else vpoly.vertices.tolist(),
        "normals": hpoly.normals.tolist(),
        "offsets": hpoly.offsets.tolist(),
    }


def hull_from_json(doc: dict):
    try:
        dim = int(doc["dim"])
        hpoly = HPolytope(doc["normals"], doc["offsets"], validate=False)
        vpoly = VPolytope(doc["vertices"]) if doc.get("vertices") else vertices_from_halfspaces(hpoly)
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed hull document: {exc}") from exc
    if hpoly.dim != dim or vpoly.dim != dim:
        raise DimensionMismatch(f"hull document declares dim {dim}")
    return vpoly, hpoly
