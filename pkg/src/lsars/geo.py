"""Geographic primitives: great-circle distance, k-means region seeding and
per-region bivariate Gaussians in (lat, lon) degree space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import GeoPoint

__all__ = [
    "EARTH_RADIUS_KM",
    "COVARIANCE_EPS",
    "RegionGaussian",
    "haversine_km",
    "haversine_km_array",
    "kmeans_regions",
    "gaussian_pdf",
    "gaussian_logpdf",
    "fit_region_gaussian",
]

EARTH_RADIUS_KM = 6371.0
# ridge added to every fitted covariance, in degrees^2
COVARIANCE_EPS = 1e-4


@dataclass(frozen=True)
class RegionGaussian:
    mean: np.ndarray  # (lat, lon)
    cov: np.ndarray  # 2x2

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(2)
        cov = np.asarray(self.cov, dtype=np.float64).reshape(2, 2)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def __eq__(self, other):
        if not isinstance(other, RegionGaussian):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    __hash__ = None  # type: ignore[assignment]


def haversine_km_array(lat1, lon1, lat2, lon2):
    """Vectorized great-circle distance in kilometres (inputs in degrees)."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    return float(haversine_km_array(a.lat, a.lon, b.lat, b.lon))


def _as_points(locations) -> np.ndarray:
    if len(locations) and isinstance(locations[0], GeoPoint):
        return np.array([[p.lat, p.lon] for p in locations], dtype=np.float64)
    return np.asarray(locations, dtype=np.float64).reshape(-1, 2)


def kmeans_regions(
    locations: Sequence[GeoPoint] | np.ndarray,
    R: int,
    seed: int | np.random.Generator = 0,
    max_iter: int = 100,
) -> np.ndarray:
    """Cluster locations into ``R`` regions with Lloyd's algorithm.

    Euclidean metric on raw (lat, lon).  Seeding is k-means++ over the
    distinct points; when there are fewer distinct points than ``R`` every
    distinct point seeds a centroid and the surplus centroids are placed on
    randomly chosen existing points (they stay empty, since ties go to the
    lowest centroid index).  Returns one region index per input location.
    """
    pts = _as_points(locations)
    if len(pts) == 0:
        raise ValueError("kmeans_regions needs at least one location")
    if R < 1:
        raise ValueError("R must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    distinct = np.unique(pts, axis=0)
    if len(distinct) <= R:
        extra = distinct[rng.integers(len(distinct), size=R - len(distinct))]
        centroids = np.vstack([distinct, extra])
    else:
        centroids = np.empty((R, 2))
        centroids[0] = distinct[rng.integers(len(distinct))]
        d2 = np.sum((distinct - centroids[0]) ** 2, axis=1)
        for j in range(1, R):
            total = d2.sum()
            if total <= 0.0:
                idx = rng.integers(len(distinct))
            else:
                idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
                idx = min(idx, len(distinct) - 1)
            centroids[j] = distinct[idx]
            d2 = np.minimum(d2, np.sum((distinct - centroids[j]) ** 2, axis=1))

    labels = None
    for _ in range(max_iter):
        dist = np.sum((pts[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(R):
            members = pts[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return labels.astype(np.int64)


def _chol_terms(g: RegionGaussian):
    det = g.cov[0, 0] * g.cov[1, 1] - g.cov[0, 1] * g.cov[1, 0]
    if not det > 0.0:
        raise np.linalg.LinAlgError("region covariance is singular or not positive definite")
    return det, np.linalg.inv(g.cov)


def gaussian_logpdf(l, g: RegionGaussian):
    """Log density of N(mean, cov) at one point or an (n, 2) array of points."""
    det, inv = _chol_terms(g)
    x = (l.as_array() if isinstance(l, GeoPoint) else np.asarray(l, dtype=np.float64)) - g.mean
    quad = np.einsum("...i,ij,...j->...", x, inv, x)
    return -np.log(2.0 * np.pi) - 0.5 * np.log(det) - 0.5 * quad


def gaussian_pdf(l, g: RegionGaussian):
    """Density ``exp(-0.5 (l-mu)^T Sigma^-1 (l-mu)) / (2 pi sqrt|Sigma|)``."""
    out = np.exp(gaussian_logpdf(l, g))
    return float(out) if np.ndim(out) == 0 else out


def fit_region_gaussian(
    assigned, previous_mean=None, eps: float = COVARIANCE_EPS
) -> RegionGaussian:
    """Sample mean and unbiased sample covariance plus ``eps * I``.

    One point gives that point as the mean; no points keep
    ``previous_mean`` (origin if none).  Both degenerate cases get
    covariance ``eps * I``.
    """
    pts = _as_points(assigned) if len(assigned) else np.zeros((0, 2))
    ridge = eps * np.eye(2)
    if len(pts) == 0:
        mean = np.zeros(2) if previous_mean is None else np.asarray(previous_mean, dtype=np.float64)
        return RegionGaussian(mean, ridge)
    mean = pts.mean(axis=0)
    if len(pts) == 1:
        return RegionGaussian(mean, ridge)
    x = pts - mean
    cov = (x.T @ x) / (len(pts) - 1)
    cov = 0.5 * (cov + cov.T)
    return RegionGaussian(mean, cov + ridge)
