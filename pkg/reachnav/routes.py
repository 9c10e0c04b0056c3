# reachnav/routes.py
# Defines the Flask routes/endpoints for planning and verification.

import time

import pandas as pd
from flask import Blueprint, current_app, jsonify, request

from . import utils
from .errors import SchemaError
from .planner import plot_data, run, verify_trajectory
from .scenario import apply_overrides, build_scenario, parse_config

# Create Blueprint for the simulator endpoints
sim_bp = Blueprint('sim', __name__)


def _json_body():
    if not request.is_json:
        raise SchemaError("Request must be JSON")
    body = request.get_json()
    if not isinstance(body, dict) or 'scenario' not in body:
        raise SchemaError("'scenario' field is required")
    return body


def _scenario_from(body):
    # relative PLY paths in posted scenarios resolve against the fixtures directory
    config = parse_config(body['scenario'])
    return build_scenario(config, base_dir=current_app.config['FIXTURES_DIR'])


@sim_bp.route('/health', methods=['GET'])
def health_check():
    """Basic liveness check."""
    return jsonify({"status": "OK", "timestamp": time.time()}), 200


@sim_bp.route('/plan', methods=['POST'])
def plan_handler():
    """Runs the receding-horizon planner on a posted scenario."""
    start_time = time.time()
    body = _json_body()
    scenario = _scenario_from(body)
    params = scenario.params
    if body.get('params'):
        params = apply_overrides(params, body['params'])

    traj = run(scenario, params)
    response = {
        "outcome": traj.outcome.value,
        "samples": utils.trajectory_records(traj),
    }
    if body.get('plot_data'):
        response["plot_data"] = plot_data(scenario, traj)
    current_app.logger.info("Plan finished (%s) in %.2fs", traj.outcome.value, time.time() - start_time)
    return jsonify(response), 200


@sim_bp.route('/verify', methods=['POST'])
def verify_handler():
    """Checks a posted trajectory (CSV rows as records) against a scenario."""
    body = _json_body()
    rows = body.get('trajectory')
    if not isinstance(rows, list):
        raise SchemaError("'trajectory' must be a list of sample records")
    scenario = _scenario_from(body)
    frame = pd.DataFrame.from_records(rows, columns=utils.TRAJECTORY_COLUMNS)
    report = verify_trajectory(utils.trajectory_from_frame(frame), scenario)
    return jsonify(report.to_json()), 200
