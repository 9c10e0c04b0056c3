# data_generation/visualize_plot_data.py
# Renders the plot JSON emitted by `reachnav plan --plot-data` as a 3D figure:
# obstacles, C-space hulls, goal, reach-tube snapshots and the trajectory.

import argparse
import json

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns
from mpl_toolkits.mplot3d.art3d import Poly3DCollection
from scipy.spatial import ConvexHull, QhullError


def _hull_faces(vertices):
    points = np.asarray(vertices, dtype=float)
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError):
        return None
    return [points[simplex] for simplex in hull.simplices]


def _draw_hull(ax, vertices, color, alpha, edge=None):
    faces = _hull_faces(vertices)
    if faces is None:
        pts = np.asarray(vertices, dtype=float)
        ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], color=color, s=4)
        return
    ax.add_collection3d(Poly3DCollection(faces, facecolor=color, alpha=alpha, edgecolor=edge, linewidth=0.2))


def render_plot_data(plot, out_path, show_cspace=True):
    """Draw one plot-data document and save it to out_path."""
    sns.set_theme(style="whitegrid")
    palette = sns.color_palette("deep")
    fig = plt.figure(figsize=(8, 8))
    ax = fig.add_subplot(111, projection="3d")

    for obstacle in plot["obstacles"]:
        _draw_hull(ax, obstacle, palette[3], 0.45, edge="k")
    if show_cspace:
        for inflated in plot.get("cspace", []):
            _draw_hull(ax, inflated, palette[7], 0.08)
    _draw_hull(ax, plot["goal"], palette[2], 0.6, edge="k")
    for snapshot in plot.get("reach_snapshots", []):
        _draw_hull(ax, snapshot["vertices"], palette[0], 0.15)

    positions = np.array([s["position"] for s in plot["trajectory"]])
    if positions.size:
        ax.plot(positions[:, 0], positions[:, 1], positions[:, 2], color=palette[1], linewidth=2, label="trajectory")
        ax.scatter(*positions[0], color="k", s=25, label="start")

    lower, upper = plot["arena"]["min"], plot["arena"]["max"]
    ax.set_xlim(lower[0], upper[0])
    ax.set_ylim(lower[1], upper[1])
    ax.set_zlim(lower[2], upper[2])
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.set_title(f"Outcome: {plot.get('outcome')}")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    print(f"Saved figure to {out_path}")
    return out_path


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description="Render reachnav plot data")
    parser.add_argument("plot_json")
    parser.add_argument("output")
    parser.add_argument("--no-cspace", action="store_true")
    args = parser.parse_args()
    with open(args.plot_json, "r", encoding="utf-8") as handle:
        render_plot_data(json.load(handle), args.output, show_cspace=not args.no_cspace)
