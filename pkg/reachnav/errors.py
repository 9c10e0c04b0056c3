# reachnav/errors.py
# Exception hierarchy shared by the geometry kernel, solvers, planner and CLI.


class NavError(Exception):
    """Base class for every error raised by reachnav."""


# --- Geometry ---
class GeometryError(NavError):
    pass


class DegenerateInput(GeometryError):
    """Points are affinely dependent (a flat cloud has no full-dimensional hull)."""


class EmptyInput(GeometryError):
    pass


class ZeroDirection(GeometryError):
    pass


class DimensionMismatch(GeometryError):
    pass


class EmptyPolytope(GeometryError):
    pass


class UnboundedPolytope(GeometryError):
    pass


# --- Point clouds ---
class PlyError(NavError):
    pass


class MissingHeader(PlyError):
    pass


class UnsupportedFormat(PlyError):
    pass


class CountMismatch(PlyError):
    pass


class MalformedRow(PlyError):
    pass


class NonPositiveVoxel(NavError):
    pass


class TooFewPoints(NavError):
    pass


class InvalidFilterParams(NavError):
    """Neighbour count or sigma outside the filter's domain."""


# --- Convex programs ---
class SolverError(NavError):
    pass


class Unbounded(SolverError):
    pass


class PlanInfeasible(SolverError):
    """No separating-facet choice gives a feasible receding-horizon program."""


class SolverStall(SolverError):
    pass


# --- Reachability ---
class ReachabilityError(NavError):
    pass


class InvalidHorizon(ReachabilityError):
    pass


class GridMismatch(ReachabilityError):
    pass


class InsufficientDirections(ReachabilityError):
    pass


# --- Scenarios ---
class ScenarioError(NavError):
    pass


class InvalidScenario(ScenarioError):
    pass


class InvalidParams(ScenarioError):
    pass


class SchemaError(ScenarioError):
    pass


class IoError(ScenarioError):
    pass


class PlacementFailure(ScenarioError):
    pass
