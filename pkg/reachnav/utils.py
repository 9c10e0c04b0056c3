# reachnav/utils.py
# Utility functions: result file formats (hull/reach/report/plot JSON, trajectory CSV)
# and the Flask error-handler registration.

import json
import logging
import math
import traceback

import numpy as np
import pandas as pd
from flask import jsonify
from werkzeug.exceptions import HTTPException

from .errors import IoError, NavError, SchemaError
from .planner import StepDiagnostics, Trajectory

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = [
    "t", "x", "y", "z", "vx", "vy", "vz", "ux", "uy", "uz",
    "dist_to_goal", "min_clearance", "safe_cert",
]


# --- JSON ---
def write_json(doc, path):
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2, allow_nan=False)
            handle.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    except ValueError as exc:
        raise SchemaError(f"cannot encode {path} as strict JSON: {exc}") from exc


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def reach_to_json(reach) -> dict:
    """Hull-document layout (facets only) plus the time and per-facet support data."""
    normals = reach.normals
    return {
        "dim": int(normals.shape[1]),
        "vertices": [],
        "time": reach.time,
        "normals": normals.tolist(),
        "offsets": reach.offsets.tolist(),
        "support_points": [f.support_point.tolist() for f in reach.facets],
        "position_indices": list(reach.position_indices),
        "position_normals": [f.normal.tolist() for f in reach.position_facets],
        "position_offsets": [f.offset for f in reach.position_facets],
    }


# --- Trajectory CSV ---
def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    data = np.hstack([traj.times[:, None], traj.states, traj.controls])
    frame = pd.DataFrame(data, columns=TRAJECTORY_COLUMNS[:10])
    frame["dist_to_goal"] = [d.dist_to_goal for d in traj.diagnostics]
    frame["min_clearance"] = [d.min_clearance for d in traj.diagnostics]
    frame["safe_cert"] = [int(d.safe_cert) for d in traj.diagnostics]
    return frame


def trajectory_records(traj: Trajectory) -> list:
    """Samples as JSON-safe records; infinite clearance (no obstacles) becomes null."""
    records = trajectory_frame(traj).to_dict(orient="records")
    return [
        {key: None if isinstance(value, float) and not math.isfinite(value) else value
         for key, value in record.items()}
        for record in records
    ]


def write_trajectory_csv(traj: Trajectory, path):
    try:
        trajectory_frame(traj).to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_trajectory_csv(path) -> Trajectory:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.EmptyDataError) as exc:
        raise IoError(f"cannot read trajectory {path}: {exc}") from exc
    return trajectory_from_frame(frame, path)


def trajectory_from_frame(frame: pd.DataFrame, source="trajectory") -> Trajectory:
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise SchemaError(f"{source}: trajectory header must be {','.join(TRAJECTORY_COLUMNS)}")
    if frame.empty:
        raise SchemaError(f"{source}: trajectory has no samples")
    times = frame["t"].to_numpy(dtype=float)
    if np.any(np.diff(times) <= 0):
        raise SchemaError(f"{source}: sample times must be strictly increasing")
    # null clearance in JSON records means no obstacles
    clearance = pd.to_numeric(frame["min_clearance"]).fillna(np.inf)
    diagnostics = [
        StepDiagnostics(float(row.dist_to_goal), float(gap), bool(row.safe_cert))
        for row, gap in zip(frame.itertuples(index=False), clearance)
    ]
    return Trajectory(
        times,
        frame[["x", "y", "z", "vx", "vy", "vz"]].to_numpy(dtype=float),
        frame[["ux", "uy", "uz"]].to_numpy(dtype=float),
        diagnostics,
    )


# --- Flask ---
def init_app(app):
    """Register JSON error handlers with the Flask app."""

    @app.errorhandler(NavError)
    def handle_nav_error(exc):
        status = 422 if isinstance(exc, SchemaError) else 400
        logger.info("Request rejected (%s): %s", type(exc).__name__, exc)
        return jsonify({"error": str(exc), "kind": type(exc).__name__}), status

    @app.errorhandler(Exception)
    def handle_unexpected(exc):
        if isinstance(exc, HTTPException):
            return jsonify({"error": exc.description}), exc.code
        logger.error("Unexpected error: %s\n%s", exc, traceback.format_exc())
        return jsonify({"error": "An internal server error occurred."}), 500
