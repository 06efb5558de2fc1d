import itertools
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from lsars.corpus import GeoPoint
from lsars.geo import (
    COVARIANCE_EPS,
    RegionGaussian,
    fit_region_gaussian,
    gaussian_pdf,
    haversine_km,
    kmeans_regions,
)
from oracles import haversine_by_hand

lat = st.floats(-90, 90, allow_nan=False)
lon = st.floats(-180, 180, allow_nan=False)
point = st.builds(GeoPoint, lat, lon)


class TestHaversine:
    def test_identity(self):
        assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0

    def test_quarter_circumference(self):
        expected = math.pi / 2 * 6371.0  # 10007.543...
        assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)) == pytest.approx(expected, abs=0.01)
        assert expected == pytest.approx(10007.543, abs=0.01)

    def test_one_degree(self):
        expected = math.pi * 6371.0 / 180  # 111.195
        assert haversine_km(GeoPoint(1, 0), GeoPoint(0, 0)) == pytest.approx(expected, abs=0.01)
        assert expected == pytest.approx(111.195, abs=0.01)

    @given(point, point)
    @settings(max_examples=100)
    def test_matches_hand_formula_and_symmetric(self, a, b):
        d = haversine_km(a, b)
        assert d == pytest.approx(haversine_by_hand(a.lat, a.lon, b.lat, b.lon), abs=1e-6)
        assert d == haversine_km(b, a)

    @given(point, point, point)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-6


def _sse(points, labels):
    total = 0.0
    for k in set(labels):
        members = points[labels == k]
        total += ((members - members.mean(axis=0)) ** 2).sum()
    return total


class TestKMeans:
    def test_single_cluster(self, rng):
        pts = rng.normal(size=(20, 2))
        assert np.all(kmeans_regions(pts, 1, seed=0) == 0)

    def test_two_clouds_match_exhaustive_partition(self, rng):
        pts = np.vstack([rng.normal(0, 1, (5, 2)), rng.normal(50, 1, (5, 2))])
        labels = kmeans_regions(pts, 2, seed=3)
        # brute force over all 2-partitions of the 10 points
        best, best_labels = np.inf, None
        for bits in itertools.product([0, 1], repeat=len(pts) - 1):
            lab = np.array((0,) + bits)
            if lab.min() == lab.max():
                continue
            cost = _sse(pts, lab)
            if cost < best:
                best, best_labels = cost, lab
        same = np.array_equal(labels, best_labels) or np.array_equal(labels, 1 - best_labels)
        assert same
        assert _sse(pts, labels) == pytest.approx(best)

    def test_one_region_per_distinct_point(self):
        pts = np.array([[0, 0], [1, 1], [5, 5], [1, 1], [9, 0]], dtype=float)
        labels = kmeans_regions(pts, 4, seed=0)
        groups = {}
        for p, l in zip(map(tuple, pts), labels):
            groups.setdefault(l, set()).add(p)
        assert all(len(g) == 1 for g in groups.values())
        assert len(groups) == 4

    def test_fewer_distinct_points_than_regions(self):
        pts = np.array([[0, 0], [0, 0], [3, 3]], dtype=float)
        labels = kmeans_regions(pts, 5, seed=0)
        assert labels[0] == labels[1] != labels[2]
        assert labels.max() < 5

    def test_nearest_centroid_property(self, rng):
        pts = rng.uniform(-10, 10, size=(60, 2))
        labels = kmeans_regions(pts, 4, seed=7)
        cents = np.array([pts[labels == k].mean(axis=0) for k in range(4)])
        d = ((pts[:, None] - cents[None]) ** 2).sum(axis=2)
        assert np.all(d[np.arange(len(pts)), labels] <= d.min(axis=1) + 1e-12)

    def test_deterministic(self, rng):
        pts = rng.uniform(-10, 10, size=(40, 2))
        assert np.array_equal(kmeans_regions(pts, 3, seed=9), kmeans_regions(pts, 3, seed=9))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            kmeans_regions(np.zeros((0, 2)), 2)


class TestGaussian:
    def test_peak_identity(self):
        g = RegionGaussian([1.0, 2.0], np.eye(2))
        assert gaussian_pdf(GeoPoint(1, 2), g) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
        assert 1 / (2 * math.pi) == pytest.approx(0.15915, abs=1e-5)

    def test_offset_scaled_identity(self):
        g = RegionGaussian([0.0, 0.0], 2 * np.eye(2))
        expected = math.exp(-0.5) / (4 * math.pi)
        assert gaussian_pdf(GeoPoint(1, 1), g) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.04826, abs=1e-5)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_symmetric(self, dx, dy):
        g = RegionGaussian([10.0, 20.0], [[2.0, 0.5], [0.5, 1.0]])
        a = gaussian_pdf(GeoPoint(10 + dx, 20 + dy), g)
        b = gaussian_pdf(GeoPoint(10 - dx, 20 - dy), g)
        assert a == pytest.approx(b, rel=1e-12)
        assert a > 0

    def test_integrates_to_one(self):
        cov = np.array([[1.5, 0.4], [0.4, 0.8]])
        g = RegionGaussian([5.0, -3.0], cov)
        sx, sy = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
        xs = np.linspace(5 - 6 * sx, 5 + 6 * sx, 601)
        ys = np.linspace(-3 - 6 * sy, -3 + 6 * sy, 601)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        dens = gaussian_pdf(np.stack([X, Y], axis=-1), g)
        total = trapezoid(trapezoid(dens, ys, axis=1), xs)
        assert total == pytest.approx(1.0, abs=0.01)

    def test_singular_raises(self):
        with pytest.raises(np.linalg.LinAlgError):
            gaussian_pdf(GeoPoint(0, 0), RegionGaussian([0, 0], np.zeros((2, 2))))


class TestFit:
    def test_two_points(self):
        g = fit_region_gaussian([GeoPoint(0, 0), GeoPoint(2, 0)])
        np.testing.assert_allclose(g.mean, [1, 0], atol=1e-12)
        np.testing.assert_allclose(g.cov, [[2 + COVARIANCE_EPS, 0], [0, COVARIANCE_EPS]], atol=1e-12)

    def test_single_point(self):
        g = fit_region_gaussian([GeoPoint(3, 4)])
        np.testing.assert_array_equal(g.mean, [3, 4])
        np.testing.assert_array_equal(g.cov, COVARIANCE_EPS * np.eye(2))

    def test_empty_keeps_previous_mean(self):
        g = fit_region_gaussian([], previous_mean=[7.0, 8.0])
        np.testing.assert_array_equal(g.mean, [7, 8])
        np.testing.assert_array_equal(g.cov, COVARIANCE_EPS * np.eye(2))

    def test_statistical_recovery(self):
        rng = np.random.default_rng(2024)
        mean = np.array([40.0, -74.0])
        cov = np.array([[0.5, 0.2], [0.2, 0.3]])
        n = 10_000
        pts = rng.multivariate_normal(mean, cov, size=n)
        g = fit_region_gaussian(pts)
        sigma = np.sqrt(np.diag(cov))
        assert np.all(np.abs(g.mean - mean) < 3 * sigma / math.sqrt(n))
        np.testing.assert_allclose(g.cov, cov, rtol=0.2)
