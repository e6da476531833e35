"""Ground-plane recovery and 3D-to-grid projection.

Consumes already-reconstructed point sets and camera positions: fits the
camera height plane, sweeps it downward with RANSAC refits to find the floor,
recovers metric scale from the user's height, and projects 3D points into the
2D cell grid.
"""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_TILT_DEG = 15.0


class GeometryError(ValueError):
    """Degenerate input or failed consensus."""


@dataclass(frozen=True)
class Plane:
    """Plane {q : normal . q == offset} with unit normal."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise GeometryError(f"plane normal must be unit length, got {self.normal}")

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    def signed_distance(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.n - self.offset

    def project(self, points) -> np.ndarray:
        """Orthogonal projection of points onto the plane."""
        pts = np.asarray(points, dtype=float)
        d = np.atleast_1d(self.signed_distance(pts))
        return np.atleast_2d(pts) - d[:, None] * self.n[None, :]


def _canonical_plane(normal: np.ndarray, offset: float) -> Plane:
    """Normalize and fix the sign: offset > 0, or largest normal entry > 0."""
    norm = float(np.linalg.norm(normal))
    if norm < 1e-12:
        raise GeometryError("zero-length plane normal")
    n = normal / norm
    d = offset / norm
    if d < -1e-12 or (abs(d) <= 1e-12 and n[np.argmax(np.abs(n))] < 0):
        n, d = -n, -d
    return Plane((float(n[0]), float(n[1]), float(n[2])), float(d))


@dataclass(frozen=True)
class CameraPose:
    """3D camera position with a unit heading on the ground plane."""

    position: tuple[float, float, float]
    heading: tuple[float, float]

    def __post_init__(self):
        if abs(math.hypot(*self.heading) - 1.0) > 1e-6:
            raise GeometryError(f"heading must be unit length, got {self.heading}")


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 1000
    inlier_threshold: float = 0.05
    min_inlier_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise GeometryError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise GeometryError("inlier threshold must be positive")


def fit_plane_least_squares(points) -> Plane:
    """Total-least-squares plane through >= 3 non-collinear points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise GeometryError(f"need >= 3 points of dimension 3, got shape {pts.shape}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    # collinear or coincident input has < 2 significant directions
    scale = max(float(s[0]), 1e-12)
    if s[1] <= 1e-9 * scale or s[0] <= 1e-12:
        raise GeometryError("degenerate point set: points are collinear or coincident")
    normal = vt[2]
    return _canonical_plane(normal, float(normal @ centroid))


def _angle_deg(n1: np.ndarray, n2: np.ndarray) -> float:
    c = min(1.0, abs(float(n1 @ n2)))
    return math.degrees(math.acos(c))


def _ransac_on_subset(pts, params, rng, ref_normal, max_angle_deg):
    """Best plane through 3-point samples, constrained near ref_normal."""
    n_pts = pts.shape[0]
    best_count = 0
    best_normal = None
    best_offset = 0.0
    for _ in range(params.iterations):
        idx = rng.choice(n_pts, size=3, replace=False)
        a, b, c = pts[idx]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        if _angle_deg(normal, ref_normal) > max_angle_deg:
            continue
        dist = np.abs(pts @ normal - normal @ a)
        count = int((dist <= params.inlier_threshold).sum())
        if count > best_count:
            best_count = count
            best_normal = normal
            best_offset = float(normal @ a)
    if best_normal is None:
        return None
    return _canonical_plane(best_normal, best_offset)


def refine_ground_plane_ransac(
    height_plane: Plane,
    points,
    params: RansacParams,
    user_height_m: float,
    max_angle_deg: float = DEFAULT_MAX_TILT_DEG,
) -> Plane:
    """Sweep the height plane downward and RANSAC-refit at each offset.

    Candidate planes start at 20 evenly spaced offsets below the height plane
    (down to 2.5 provisional user heights, taken as the 99th percentile of
    point depths below the height plane); the max-inlier refit wins.
    Deterministic given params.seed.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise GeometryError(f"need a non-empty (N, 3) point array, got shape {pts.shape}")
    if user_height_m <= 0:
        raise GeometryError("user height must be positive")
    rng = np.random.default_rng(params.seed)

    sd = height_plane.signed_distance(pts)
    # "down" is the side of the height plane holding the majority of points
    down = -1.0 if (sd < 0).sum() >= (sd > 0).sum() else 1.0
    depths = down * sd
    below = depths[depths > 0]
    if below.size < 3:
        raise GeometryError("no consensus: no points below the height plane")
    unit_depth = float(np.quantile(below, 0.99))
    offsets = np.linspace(0.0, 2.5 * unit_depth, 20)
    slab_half = max((offsets[1] - offsets[0]) / 2.0, 3.0 * params.inlier_threshold)

    best = None
    best_count = 0
    for delta in offsets:
        sel = np.abs(depths - delta) <= slab_half
        if sel.sum() < 3:
            continue
        model = _ransac_on_subset(pts[sel], params, rng, height_plane.n, max_angle_deg)
        if model is None:
            continue
        inl = np.abs(model.signed_distance(pts[sel])) <= params.inlier_threshold
        if inl.sum() >= 3:
            try:
                refit = fit_plane_least_squares(pts[sel][inl])
            except GeometryError:
                refit = model
            if _angle_deg(refit.n, height_plane.n) <= max_angle_deg:
                model = refit
        count = int((np.abs(model.signed_distance(pts)) <= params.inlier_threshold).sum())
        if count > best_count:
            best_count = count
            best = model

    if best is None or best_count < params.min_inlier_fraction * pts.shape[0]:
        raise GeometryError(
            f"no consensus: best candidate has {best_count}/{pts.shape[0]} inliers"
        )
    return best


def estimate_metric_scale(
    ground: Plane,
    height_plane: Plane,
    user_height_m: float,
    max_angle_deg: float = DEFAULT_MAX_TILT_DEG,
) -> float:
    """Meters per reconstruction unit from the plane gap and the user height."""
    if user_height_m <= 0:
        raise GeometryError("user height must be positive")
    if _angle_deg(ground.n, height_plane.n) > max_angle_deg:
        raise GeometryError(
            f"planes are not parallel within {max_angle_deg} degrees"
        )
    dist = plane_distance(ground, height_plane)
    if dist <= 1e-12:
        raise GeometryError("inter-plane distance is zero")
    return user_height_m / dist


def plane_distance(a: Plane, b: Plane) -> float:
    """Distance from an anchor point of plane b to plane a (near-parallel planes)."""
    anchor = b.offset * b.n
    return float(abs(a.signed_distance(anchor)[0]))


def plane_frame(plane: Plane) -> tuple[np.ndarray, np.ndarray]:
    """Right-handed in-plane axes (e1, e2) with e1 x e2 = normal.

    e1 is the normalized projection of the world x-axis onto the plane, or of
    the world y-axis when x is near-parallel to the normal.
    """
    n = plane.n
    for axis in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        e1 = axis - (axis @ n) * n
        norm = np.linalg.norm(e1)
        if norm > 1e-6:
            e1 = e1 / norm
            return e1, np.cross(n, e1)
    raise AssertionError("unreachable: normal cannot be parallel to both x and y")


def plane_coordinates(plane: Plane, point3) -> tuple[float, float]:
    """In-plane (u, v) coordinates of the orthogonal projection of point3."""
    e1, e2 = plane_frame(plane)
    p = np.asarray(point3, dtype=float)
    rel = p - plane.offset * plane.n
    return float(rel @ e1), float(rel @ e2)


def project_to_grid(
    ground: Plane, point3, origin: tuple[float, float], cell_size: float
) -> tuple[int, int]:
    """Project a 3D point onto the ground plane and floor to an integer cell."""
    u, v = plane_coordinates(ground, point3)
    return (
        math.floor((u - origin[0]) / cell_size),
        math.floor((v - origin[1]) / cell_size),
    )


def backproject_detection(
    keypoints3d, ground: Plane, origin: tuple[float, float], cell_size: float
) -> tuple[float, float]:
    """Mean of the detection keypoints projected to continuous grid units."""
    pts = np.asarray(keypoints3d, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise GeometryError(f"need a non-empty (N, 3) keypoint array, got {pts.shape}")
    u, v = plane_coordinates(ground, pts.mean(axis=0))
    return ((u - origin[0]) / cell_size, (v - origin[1]) / cell_size)
