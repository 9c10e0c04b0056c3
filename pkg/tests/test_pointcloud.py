import numpy as np
import pytest
from numpy.testing import assert_array_equal

from reachnav.errors import (
    CountMismatch,
    IoError,
    MalformedRow,
    MissingHeader,
    InvalidFilterParams,
    NonPositiveVoxel,
    TooFewPoints,
    UnsupportedFormat,
)
from reachnav.geometry import PointCloud
from reachnav.pointcloud import outlier_filter, parse_ply, read_ply, voxel_downsample, write_ply

HEADER = b"ply\nformat ascii 1.0\nelement vertex %d\nproperty float x\nproperty float y\nproperty float z\nend_header\n"


def _doc(rows, count=None):
    count = len(rows) if count is None else count
    return HEADER % count + b"".join(r + b"\n" for r in rows)


def test_parse_keeps_file_order():
    doc = parse_ply(_doc([b"1 2 3", b"-1.5 0 2e-3", b"0 0 0"]))
    assert doc.vertex_count == 3
    assert_array_equal(doc.points.points, [[1, 2, 3], [-1.5, 0, 0.002], [0, 0, 0]])


def test_parse_ignores_extra_properties_and_elements():
    data = (
        b"ply\nformat ascii 1.0\ncomment exported\n"
        b"element camera 1\nproperty float fov\n"
        b"element vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\n"
        b"property uchar red\n"
        b"element face 1\nproperty list uchar int vertex_indices\n"
        b"end_header\n"
        b"60\n"
        b"0 1 2 3 255\n"
        b"0 4 5 6 0\n"
        b"3 0 1 1\n"
    )
    doc = parse_ply(data)
    assert_array_equal(doc.points.points, [[1, 2, 3], [4, 5, 6]])
    assert doc.ignored_properties == ["nx", "red"]


def test_parse_errors():
    with pytest.raises(MissingHeader):
        parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n1\n")
    with pytest.raises(MissingHeader):
        parse_ply(b"obj\nend_header\n")
    with pytest.raises(MissingHeader):
        parse_ply(b"ply\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n")
    with pytest.raises(MissingHeader):
        parse_ply(b"ply\ncomment late format\nformat ascii 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(UnsupportedFormat):
        parse_ply(HEADER.replace(b"ascii", b"binary_little_endian") % 0)
    with pytest.raises(UnsupportedFormat):
        parse_ply(b"ply\nformat ascii 1.0\nelement vertex 0\nproperty list uchar float x\nend_header\n")
    with pytest.raises(CountMismatch):
        parse_ply(_doc([b"1 2 3"], count=2))
    with pytest.raises(MalformedRow):
        parse_ply(_doc([b"1 2"]))
    with pytest.raises(MalformedRow):
        parse_ply(_doc([b"1 two 3"]))
    with pytest.raises(MalformedRow):
        parse_ply(_doc([b"1 nan 3"]))


def test_read_ply_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_ply(tmp_path / "missing.ply")


def test_write_parse_round_trip_is_exact_at_printed_precision(rng):
    points = rng.uniform(-100, 100, size=(1000, 3)) * 10.0 ** rng.integers(-4, 3, size=(1000, 1))
    parsed = parse_ply(write_ply(PointCloud(points), comment="random")).points.points
    expected = np.array([[float("%.9g" % v) for v in row] for row in points])
    assert_array_equal(parsed, expected)


def test_voxel_downsample_centroids():
    cloud = PointCloud([[0.01, 0.01, 0.01], [0.03, 0.05, 0.01], [1.01, 0.0, 0.0], [1.05, 0.02, 0.04]])
    reduced = voxel_downsample(cloud, 0.1)
    assert len(reduced) == 2
    assert np.allclose(reduced.points, [[0.02, 0.03, 0.01], [1.03, 0.01, 0.02]])


def test_voxel_downsample_validation():
    with pytest.raises(NonPositiveVoxel):
        voxel_downsample(PointCloud([[0, 0, 0]]), 0.0)
    assert len(voxel_downsample(PointCloud(np.empty((0, 3))), 0.5)) == 0


def _lattice(n=(5, 5, 4), spacing=0.1):
    return np.array([(i, j, k) for i in range(n[0]) for j in range(n[1]) for k in range(n[2])]) * spacing


def _ring(count=40, radius=1.0):
    angles = 2 * np.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(count)])


def test_outlier_filter_removes_far_points_and_keeps_order():
    ring = _ring()
    points = np.vstack([ring[:20], [[0, 0, 50]], ring[20:], [[0, 0, -50]]])
    filtered = outlier_filter(PointCloud(points), k=2, sigma=1.0)
    assert_array_equal(filtered.points, ring)


def test_outlier_filter_is_idempotent_once_settled():
    ring = _ring()
    points = np.vstack([ring, [[0, 0, 50]], [[30, 0, 0]], [[0, -40, 5]]])
    once = outlier_filter(PointCloud(points), k=2, sigma=1.0)
    twice = outlier_filter(once, k=2, sigma=1.0)
    assert len(once) == 40
    assert_array_equal(twice.points, once.points)


def test_outlier_filter_keeps_uniform_cloud_at_large_sigma(rng):
    cloud = PointCloud(rng.uniform(size=(300, 3)))
    assert_array_equal(outlier_filter(cloud, k=4, sigma=10.0).points, cloud.points)


def test_voxel_downsample_is_idempotent(rng):
    once = voxel_downsample(PointCloud(rng.uniform(-1, 1, size=(2000, 3))), 0.1)
    assert_array_equal(voxel_downsample(once, 0.1).points, once.points)


def test_voxel_support_gap_is_bounded(rng):
    cloud = PointCloud(rng.uniform(-1, 1, size=(1000, 3)))
    reduced = voxel_downsample(cloud, 0.1)
    directions = rng.normal(size=(50, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    gap = (cloud.points @ directions.T).max(axis=0) - (reduced.points @ directions.T).max(axis=0)
    assert np.all(gap >= -1e-12)
    assert np.all(gap <= 0.1 * np.sqrt(3) / 2 + 1e-12)


def test_outlier_filter_rejects_bad_parameters():
    cloud = PointCloud(_ring())
    for k, sigma in [(4, 0.0), (4, -1.0), (4, float("nan")), (0, 1.0), (2.5, 1.0), (True, 1.0)]:
        with pytest.raises(InvalidFilterParams):
            outlier_filter(cloud, k, sigma)
    assert len(outlier_filter(cloud, 4.0, 1.0)) == 40


def test_outlier_filter_caps_removals():
    cluster = _lattice((2, 2, 2))
    far = [[50, 0, 0], [-50, 0, 0], [0, 50, 0], [0, -50, 0]]
    filtered = outlier_filter(PointCloud(np.vstack([cluster, far])), k=3, sigma=0.5)
    assert len(filtered) == 10
    kept = {tuple(p) for p in filtered.points}
    assert all(tuple(p) in kept for p in cluster)


def test_outlier_filter_needs_more_points_than_k():
    with pytest.raises(TooFewPoints):
        outlier_filter(PointCloud(_lattice((2, 1, 1))), k=2, sigma=1.0)
