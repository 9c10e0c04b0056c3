# reachnav/pointcloud.py
# ASCII PLY ingestion and light cleaning of exported point clouds before hulling.

from __future__ import annotations

import logging
import math
import operator
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CountMismatch,
    InvalidFilterParams,
    IoError,
    MalformedRow,
    MissingHeader,
    NonPositiveVoxel,
    TooFewPoints,
    UnsupportedFormat,
)
from .geometry import PointCloud

logger = logging.getLogger(__name__)

COORDINATE_NAMES = ("x", "y", "z")
MAX_OUTLIER_FRACTION = 0.2
TIE_SLACK = 1e-9


@dataclass(frozen=True)
class PlyDocument:
    vertex_count: int
    points: PointCloud
    ignored_properties: list = field(default_factory=list)


@dataclass
class _Element:
    name: str
    count: int
    properties: list = field(default_factory=list)


# --- Parsing ---
def _parse_header(lines):
    if not lines or lines[0].strip() != "ply":
        raise MissingHeader("file does not start with 'ply'")
    if len(lines) < 2 or lines[1].split()[:1] != ["format"]:
        raise MissingHeader("'format' line must follow 'ply'")
    elements = []
    for number, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        keyword = tokens[0]
        if keyword == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise UnsupportedFormat(f"only ASCII PLY is supported, got '{raw.strip()}'")
        elif keyword == "element":
            if len(tokens) != 3:
                raise MissingHeader(f"line {number}: malformed element declaration")
            try:
                count = int(tokens[2])
            except ValueError as exc:
                raise MissingHeader(f"line {number}: element count is not an integer") from exc
            elements.append(_Element(tokens[1], count))
        elif keyword == "property":
            if not elements:
                raise MissingHeader(f"line {number}: property before any element")
            if tokens[1] == "list":
                if elements[-1].name == "vertex":
                    raise UnsupportedFormat("list properties on vertices are not supported")
                elements[-1].properties.append(tokens[-1])
            else:
                elements[-1].properties.append(tokens[2])
        else:
            raise MissingHeader(f"line {number}: unexpected header keyword '{keyword}'")
    return elements


def parse_ply(data: bytes) -> PlyDocument:
    """Parse an ASCII PLY document and return its vertex coordinates in file order."""
    marker = data.find(b"end_header")
    if marker < 0:
        raise MissingHeader("no 'end_header' line")
    try:
        header_text = data[:marker].decode("ascii")
    except UnicodeDecodeError as exc:
        raise MissingHeader("header is not ASCII") from exc
    elements = _parse_header(header_text.splitlines())

    vertex = next((e for e in elements if e.name == "vertex"), None)
    if vertex is None:
        raise MissingHeader("no 'element vertex' declaration")
    missing = [name for name in COORDINATE_NAMES if name not in vertex.properties]
    if missing:
        raise MissingHeader(f"vertex element lacks properties {missing}")
    columns = [vertex.properties.index(name) for name in COORDINATE_NAMES]
    ignored = [name for name in vertex.properties if name not in COORDINATE_NAMES]

    try:
        body = data[marker + len(b"end_header"):].decode("ascii")
    except UnicodeDecodeError as exc:
        raise UnsupportedFormat("body is not ASCII text") from exc
    rows = [line for line in body.splitlines() if line.strip()]

    # rows of elements declared before the vertex element come first
    start = 0
    for element in elements:
        if element is vertex:
            break
        start += element.count
    vertex_rows = rows[start:start + vertex.count]
    if len(vertex_rows) < vertex.count:
        raise CountMismatch(f"header declares {vertex.count} vertices, found {len(vertex_rows)} rows")

    points = np.empty((vertex.count, 3))
    for i, row in enumerate(vertex_rows):
        tokens = row.split()
        if len(tokens) != len(vertex.properties):
            raise MalformedRow(f"vertex row {i}: expected {len(vertex.properties)} values, got {len(tokens)}")
        try:
            coords = [float(tokens[c]) for c in columns]
        except ValueError as exc:
            raise MalformedRow(f"vertex row {i}: {exc}") from exc
        if not all(math.isfinite(c) for c in coords):
            raise MalformedRow(f"vertex row {i}: non-finite coordinate")
        points[i] = coords

    logger.debug("Parsed PLY: %d vertices, ignored properties %s", vertex.count, ignored)
    return PlyDocument(vertex.count, PointCloud(points), ignored)


def read_ply(path) -> PlyDocument:
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise IoError(f"cannot read PLY file {path}: {exc}") from exc
    return parse_ply(data)


def write_ply(cloud: PointCloud, comment: str | None = None) -> bytes:
    """ASCII PLY writer; coordinates are printed with 9 significant digits."""
    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines.append(f"comment {comment}")
    lines += [
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    lines += ["%.9g %.9g %.9g" % tuple(p) for p in cloud.points]
    return ("\n".join(lines) + "\n").encode("ascii")


# --- Cleaning ---
def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """One centroid per occupied axis-aligned voxel, in voxel-key order."""
    if not voxel > 0:
        raise NonPositiveVoxel(f"voxel size must be positive, got {voxel}")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((counts.size, 3))
    np.add.at(sums, inverse, cloud.points)
    centroids = sums / counts[:, None]
    logger.debug("Voxel downsample (%.4g): %d -> %d points", voxel, len(cloud), counts.size)
    return PointCloud(centroids)


def _neighbour_count(k) -> int:
    if isinstance(k, bool):
        raise InvalidFilterParams(f"k must be an integer, got {k!r}")
    if isinstance(k, (float, np.floating)) and float(k).is_integer():
        k = int(k)
    try:
        count = operator.index(k)
    except TypeError as exc:
        raise InvalidFilterParams(f"k must be an integer, got {k!r}") from exc
    if count < 1:
        raise InvalidFilterParams(f"k must be at least 1, got {count}")
    return count


def _flag_outliers(points: np.ndarray, k: int, sigma: float) -> np.ndarray:
    distances, _ = cKDTree(points).query(points, k=k + 1)
    mean_knn = distances[:, 1:].mean(axis=1)
    threshold = mean_knn.mean() + sigma * mean_knn.std()
    # identical neighbourhoods differ only by rounding
    return np.flatnonzero(mean_knn > threshold * (1.0 + TIE_SLACK))


def outlier_filter(cloud: PointCloud, k: int, sigma: float) -> PointCloud:
    """Statistical outlier removal on mean k-nearest-neighbour distance.

    Flagging and removal repeat on the survivors until nothing is flagged, so a
    settled output passes through a second call unchanged. At most 20% of the input
    is removed in total; when a pass would exceed that, only the flagged points
    farthest from the survivors' centroid go and the filter stops.
    """
    k = _neighbour_count(k)
    try:
        sigma = float(sigma)
    except (TypeError, ValueError) as exc:
        raise InvalidFilterParams(f"sigma must be a number, got {sigma!r}") from exc
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidFilterParams(f"sigma must be positive and finite, got {sigma}")
    n = len(cloud)
    if n <= k:
        raise TooFewPoints(f"need more than k={k} points, got {n}")

    cap = int(math.floor(MAX_OUTLIER_FRACTION * n))
    keep = np.arange(n)
    passes = 0
    while keep.size > k:
        flagged = _flag_outliers(cloud.points[keep], k, sigma)
        if flagged.size == 0:
            break
        passes += 1
        budget = cap - (n - keep.size)
        if flagged.size > budget:
            survivors = cloud.points[keep]
            spread = np.linalg.norm(survivors[flagged] - survivors.mean(axis=0), axis=1)
            order = np.argsort(-spread, kind="stable")
            keep = np.delete(keep, flagged[order[:budget]])
            logger.warning("Outlier filter hit the %d%% removal cap after %d passes",
                           round(100 * MAX_OUTLIER_FRACTION), passes)
            break
        keep = np.delete(keep, flagged)
    if keep.size < n:
        logger.info("Outlier filter removed %d of %d points in %d passes", n - keep.size, n, passes)
    return PointCloud(cloud.points[keep])
