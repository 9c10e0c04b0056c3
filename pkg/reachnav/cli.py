# reachnav/cli.py
# Command-line entry points: hull, reach, plan, verify.

import argparse
import logging
import sys

from .config import Config, configure_logging
from .errors import NavError
from .geometry import convex_hull, hull_to_json
from .planner import plot_data, run, verify_trajectory
from .pointcloud import outlier_filter, read_ply, voxel_downsample
from .reachability import default_directions, reach_polytope
from .scenario import load_params, load_scenario
from .utils import read_trajectory_csv, reach_to_json, write_json, write_trajectory_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GOAL_MISSED = 3


def cmd_hull(args) -> int:
    doc = read_ply(args.input)
    cloud = doc.points
    print(f"Read {doc.vertex_count} points from {args.input}")
    if args.outlier is not None:
        k, sigma = args.outlier
        cloud = outlier_filter(cloud, k, sigma)
    if not args.no_voxel:
        cloud = voxel_downsample(cloud, args.voxel)
    vertices, halfspaces = convex_hull(cloud)
    write_json(hull_to_json(vertices, halfspaces), args.output)
    print(f"Hull built: {len(halfspaces)} facets, {len(vertices)} vertices -> {args.output}")
    return EXIT_OK


def cmd_reach(args) -> int:
    scenario = load_scenario(args.scenario)
    sys_ = scenario.system
    directions = default_directions(sys_, scenario.params.facet_directions)
    reach = reach_polytope(sys_, scenario.x0, scenario.u_box, 0.0, args.time, directions,
                           args.dt or Config.REACH_DT)
    write_json(reach_to_json(reach), args.output)
    print(f"Reach polytope at T={args.time}: {len(reach.facets)} facets -> {args.output}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    params = scenario.params
    if args.params:
        params = load_params(args.params, params)
    traj = run(scenario, params)
    write_trajectory_csv(traj, args.out)
    print(f"Outcome: {traj.outcome.value} after {len(traj)} samples -> {args.out}")
    if args.plot_data:
        write_json(plot_data(scenario, traj), args.plot_data)
        print(f"Plot data -> {args.plot_data}")
    if args.require_goal and not traj.goal_reached:
        return EXIT_GOAL_MISSED
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    traj = read_trajectory_csv(args.traj)
    report = verify_trajectory(traj, scenario)
    write_json(report.to_json(), args.report)
    print(f"Verified {len(traj)} samples: {len(report.violations)} violations, "
          f"max dynamics residual {report.max_dynamics_residual:.3g} -> {args.report}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachnav", description="Polytopic reachability and safe navigation")
    parser.add_argument("--log-level", default=None, help="override REACHNAV_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    hull = sub.add_parser("hull", help="convex hull of a PLY point cloud")
    hull.add_argument("--input", required=True)
    hull.add_argument("--output", required=True)
    voxel = hull.add_mutually_exclusive_group()
    voxel.add_argument("--voxel", type=float, default=Config.DEFAULT_VOXEL,
                       help="voxel size for downsampling before hulling (default: %(default)s)")
    voxel.add_argument("--no-voxel", action="store_true", help="hull the raw cloud")
    hull.add_argument("--outlier", type=float, nargs=2, metavar=("K", "SIGMA"))
    hull.set_defaults(handler=cmd_hull)

    reach = sub.add_parser("reach", help="reach polytope of a scenario's start set")
    reach.add_argument("--scenario", required=True)
    reach.add_argument("--time", type=float, required=True)
    reach.add_argument("--output", required=True)
    reach.add_argument("--dt", type=float)
    reach.set_defaults(handler=cmd_reach)

    plan = sub.add_parser("plan", help="run the receding-horizon planner")
    plan.add_argument("--scenario", required=True)
    plan.add_argument("--out", required=True)
    plan.add_argument("--plot-data")
    plan.add_argument("--params")
    plan.add_argument("--require-goal", action="store_true")
    plan.set_defaults(handler=cmd_plan)

    verify = sub.add_parser("verify", help="check a trajectory for collisions and dynamics")
    verify.add_argument("--scenario", required=True)
    verify.add_argument("--traj", required=True)
    verify.add_argument("--report", required=True)
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except NavError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
