# reachnav/geometry_api.py
# Blueprint for the hull and reach-set API endpoints.

import numpy as np
from flask import Blueprint, current_app, jsonify, request

from . import utils
from .errors import SchemaError
from .geometry import PointCloud, convex_hull, hull_to_json
from .pointcloud import outlier_filter, voxel_downsample
from .reachability import default_directions, reach_polytope
from .scenario import build_scenario, parse_config

# Create Blueprint
geometry_bp = Blueprint('geometry_api', __name__, url_prefix='/api')


def _body():
    if not request.is_json:
        raise SchemaError("Request must be JSON")
    body = request.get_json()
    if not isinstance(body, dict):
        raise SchemaError("Request body must be a JSON object")
    return body


@geometry_bp.route('/hull', methods=['POST'])
def hull_handler():
    """
    Convex hull of posted points.
    Expects {"points": [[x,y,z], ...], "voxel": v?, "outlier": [k, sigma]?}
    """
    body = _body()
    try:
        cloud = PointCloud(np.asarray(body['points'], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"'points' must be a list of 3-vectors: {exc}") from exc
    if body.get('outlier') is not None:
        try:
            k, sigma = body['outlier']
        except (TypeError, ValueError) as exc:
            raise SchemaError("'outlier' must be a [k, sigma] pair") from exc
        cloud = outlier_filter(cloud, k, sigma)
    if body.get('voxel') is not None:
        try:
            voxel = float(body['voxel'])
        except (TypeError, ValueError) as exc:
            raise SchemaError("'voxel' must be a number") from exc
        cloud = voxel_downsample(cloud, voxel)
    vertices, halfspaces = convex_hull(cloud)
    return jsonify(hull_to_json(vertices, halfspaces)), 200


@geometry_bp.route('/reach', methods=['POST'])
def reach_handler():
    """Reach polytope of a posted scenario's start set at {"time": T}."""
    body = _body()
    if 'scenario' not in body or 'time' not in body:
        raise SchemaError("'scenario' and 'time' fields are required")
    scenario = build_scenario(parse_config(body['scenario']), base_dir=current_app.config['FIXTURES_DIR'])
    directions = default_directions(scenario.system, scenario.params.facet_directions)
    reach = reach_polytope(scenario.system, scenario.x0, scenario.u_box, 0.0, float(body['time']),
                           directions, body.get('dt') or current_app.config['REACH_DT'])
    return jsonify(utils.reach_to_json(reach)), 200
