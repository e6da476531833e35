"""Per-location side-information and the combined similarity Gram matrix.

Each location carries a scene-class score vector p, an object score vector o,
and its 2D grid coordinates. Pairwise similarity mixes a spatial RBF kernel
with chi-squared kernels on p and o; the object kernel is forced to zero when
either location has no object evidence, and the spatial kernel is zero across
scenes (scene coordinate frames are unrelated).
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

VARIANTS = ("S", "SO", "SP", "SOP")
OBJECT_KERNEL_RADIUS = math.sqrt(2.0)  # grid cells


class SideInfoError(ValueError):
    """Invalid feature vectors or kernel configuration."""


@dataclass(frozen=True)
class LocationFeatures:
    """Side-information attached to one grid location."""

    x: tuple[float, float]
    p: np.ndarray
    o: np.ndarray
    scene_id: str = ""

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        o = np.asarray(self.o, dtype=float)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
            raise SideInfoError("feature vectors must be finite")
        if (p < 0).any() or (o < 0).any():
            raise SideInfoError("feature vectors must be non-negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "o", o)

    @property
    def has_object(self) -> bool:
        return bool((self.o > 0).any())


@dataclass(frozen=True)
class KernelConfig:
    """Mixing weight, bandwidths, and the active side-information variant.

    Variants: S spatial only; SO spatial+objects; SP spatial+scene classes;
    SOP all three (objects and classes each weighted alpha/2, alpha for the
    single active kernel in SO/SP).
    """

    alpha: float = 0.5
    sigma_s: float = 2.0
    gamma_p: float = 1.0
    gamma_o: float = 1.0
    variant: str = "SOP"
    chi2_epsilon: float = 1e-10
    tau: float = 1e-4
    max_dense: int = 20000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise SideInfoError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.sigma_s <= 0 or self.gamma_p <= 0 or self.gamma_o <= 0:
            raise SideInfoError("kernel bandwidths must be positive")
        if self.variant not in VARIANTS:
            raise SideInfoError(f"variant must be one of {VARIANTS}, got {self.variant}")
        if self.tau < 0:
            raise SideInfoError("sparsification threshold must be >= 0")


@dataclass
class GramMatrix:
    """Symmetric location-similarity matrix with its row-sum degree vector."""

    matrix: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SideInfoError(f"Gram matrix must be square, got {m.shape}")
        if m.size and (float(m.min()) < -1e-12 or float(m.max()) > 1.0 + 1e-9):
            raise SideInfoError("Gram entries must lie in [0, 1]")
        if m.size and np.abs(m - m.T).max() > 1e-9:
            raise SideInfoError("Gram matrix must be symmetric")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def aggregate_scene_scores(
    grid_shape: tuple[int, int],
    image_scores: Sequence[tuple[tuple[int, int], np.ndarray]],
    radius_cells: float = 2.0,
    n_classes: Optional[int] = None,
) -> np.ndarray:
    """Average the per-image class scores within a radius of each cell.

    Returns a (width*height, C) array in row-major cell order; cells with no
    image in radius get a zero vector.
    """
    if radius_cells < 0:
        raise SideInfoError("radius must be >= 0")
    width, height = grid_shape
    if image_scores:
        vecs = [np.asarray(v, dtype=float) for _, v in image_scores]
        n_classes = vecs[0].shape[0]
        for v in vecs:
            if v.shape != (n_classes,):
                raise SideInfoError(
                    f"inconsistent score vector lengths: {v.shape[0]} vs {n_classes}"
                )
    elif n_classes is None:
        raise SideInfoError("n_classes required when image_scores is empty")
    out = np.zeros((width * height, n_classes))
    if not image_scores:
        return out
    img_cells = np.array([cell for cell, _ in image_scores], dtype=float)
    scores = np.stack(vecs)
    ii, jj = np.meshgrid(np.arange(width), np.arange(height), indexing="ij")
    centers = np.stack([ii.reshape(-1), jj.reshape(-1)], axis=1).astype(float)
    d2 = ((centers[:, None, :] - img_cells[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= radius_cells * radius_cells
    counts = within.sum(axis=1)
    sums = within @ scores
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def object_score(z: float, radius: float = OBJECT_KERNEL_RADIUS) -> float:
    """Gaussian floor-distance weighting of one detection; 0 beyond the radius."""
    if z > radius:
        return 0.0
    r2 = radius * radius
    return math.exp(-(z * z) / (2.0 * r2)) / math.sqrt(2.0 * r2 * math.pi)


def aggregate_object_scores(
    grid_shape: tuple[int, int],
    detections: Sequence[tuple[int, tuple[float, float]]],
    n_categories: int,
    radius: float = OBJECT_KERNEL_RADIUS,
) -> np.ndarray:
    """Max Gaussian-weighted detection score per (cell, category).

    Detections are (category index, continuous grid point); distances are
    taken from cell centers. Returns a (width*height, F) array.
    """
    width, height = grid_shape
    out = np.zeros((width * height, n_categories))
    if not detections:
        return out
    ii, jj = np.meshgrid(np.arange(width), np.arange(height), indexing="ij")
    centers = np.stack([ii.reshape(-1) + 0.5, jj.reshape(-1) + 0.5], axis=1)
    r2 = radius * radius
    peak = 1.0 / math.sqrt(2.0 * r2 * math.pi)
    for cat, point in detections:
        if not 0 <= cat < n_categories:
            raise SideInfoError(f"unknown object category index {cat}")
        z = np.hypot(centers[:, 0] - point[0], centers[:, 1] - point[1])
        score = np.where(z <= radius, peak * np.exp(-(z * z) / (2.0 * r2)), 0.0)
        out[:, cat] = np.maximum(out[:, cat], score)
    return out


def kernel_spatial(x_a, x_b, sigma_s: float, same_scene: bool = True) -> float:
    """RBF similarity of two grid positions; zero across scenes."""
    if not same_scene:
        return 0.0
    dx = float(x_a[0]) - float(x_b[0])
    dy = float(x_a[1]) - float(x_b[1])
    return math.exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s))


def kernel_chi2(u, v, gamma: float, epsilon: float = 1e-10) -> float:
    """Exponential chi-squared similarity of two non-negative vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise SideInfoError(f"length mismatch: {u.shape} vs {v.shape}")
    if (u < 0).any() or (v < 0).any():
        raise SideInfoError("chi-squared kernel requires non-negative entries")
    diff = u - v
    dist = float(np.sum(diff * diff / (u + v + epsilon)))
    return math.exp(-gamma * dist)


def combined_kernel(a: LocationFeatures, b: LocationFeatures, cfg: KernelConfig) -> float:
    """Variant-weighted mix of spatial, scene-class, and object similarities."""
    same = a.scene_id == b.scene_id
    ks = kernel_spatial(a.x, b.x, cfg.sigma_s, same)
    if cfg.variant == "S":
        return ks
    alpha = cfg.alpha
    if cfg.variant == "SO":
        ko = _object_kernel(a, b, cfg)
        return (1.0 - alpha) * ks + alpha * ko
    if cfg.variant == "SP":
        kp = kernel_chi2(a.p, b.p, cfg.gamma_p, cfg.chi2_epsilon)
        return (1.0 - alpha) * ks + alpha * kp
    kp = kernel_chi2(a.p, b.p, cfg.gamma_p, cfg.chi2_epsilon)
    ko = _object_kernel(a, b, cfg)
    return (1.0 - alpha) * ks + 0.5 * alpha * kp + 0.5 * alpha * ko


def _object_kernel(a: LocationFeatures, b: LocationFeatures, cfg: KernelConfig) -> float:
    if not (a.has_object and b.has_object):
        return 0.0
    return kernel_chi2(a.o, b.o, cfg.gamma_o, cfg.chi2_epsilon)


class GramBasis:
    """Pairwise distances that do not depend on alpha/gamma/sigma, reusable
    across parameter sweeps (the chi-squared guard epsilon is pinned here)."""

    def __init__(self, features: Sequence[LocationFeatures], chi2_epsilon: float = 1e-10):
        if not features:
            raise SideInfoError("need at least one location")
        n_p = features[0].p.shape[0]
        n_o = features[0].o.shape[0]
        for f in features:
            if f.p.shape[0] != n_p or f.o.shape[0] != n_o:
                raise SideInfoError("inconsistent feature dimensions across locations")
        self.m = len(features)
        x = np.array([f.x for f in features], dtype=float)
        scene_ids = [f.scene_id for f in features]
        uniq = {s: k for k, s in enumerate(dict.fromkeys(scene_ids))}
        codes = np.array([uniq[s] for s in scene_ids])
        self.same_scene = codes[:, None] == codes[None, :]
        d = x[:, None, :] - x[None, :, :]
        self.spatial_sq = (d * d).sum(axis=2)
        p = np.stack([f.p for f in features])
        o = np.stack([f.o for f in features])
        self.chi2_p = _chi2_distances(p, chi2_epsilon)
        self.chi2_o = _chi2_distances(o, chi2_epsilon)
        has = np.array([f.has_object for f in features])
        self.object_pair = has[:, None] & has[None, :]

    def gram(self, cfg: KernelConfig) -> GramMatrix:
        if self.m > cfg.max_dense:
            raise SideInfoError(
                f"{self.m} locations exceed the dense Gram cap of {cfg.max_dense}; "
                "raise max_dense or sparsify the input"
            )
        ks = np.where(
            self.same_scene,
            np.exp(-self.spatial_sq / (2.0 * cfg.sigma_s * cfg.sigma_s)),
            0.0,
        )
        if cfg.variant == "S":
            k = ks
        else:
            alpha = cfg.alpha
            if cfg.variant == "SO":
                ko = np.where(self.object_pair, np.exp(-cfg.gamma_o * self.chi2_o), 0.0)
                k = (1.0 - alpha) * ks + alpha * ko
            elif cfg.variant == "SP":
                kp = np.exp(-cfg.gamma_p * self.chi2_p)
                k = (1.0 - alpha) * ks + alpha * kp
            else:
                kp = np.exp(-cfg.gamma_p * self.chi2_p)
                ko = np.where(self.object_pair, np.exp(-cfg.gamma_o * self.chi2_o), 0.0)
                k = (1.0 - alpha) * ks + 0.5 * alpha * kp + 0.5 * alpha * ko
        if cfg.tau > 0:
            k[k < cfg.tau] = 0.0
        return GramMatrix(matrix=k, degrees=k.sum(axis=1))


def _chi2_distances(vectors: np.ndarray, epsilon: float = 1e-10) -> np.ndarray:
    """Pairwise chi-squared distances, accumulated one feature dim at a time."""
    m = vectors.shape[0]
    out = np.zeros((m, m))
    for c in range(vectors.shape[1]):
        col = vectors[:, c]
        diff = col[:, None] - col[None, :]
        out += diff * diff / (col[:, None] + col[None, :] + epsilon)
    return out


def build_gram_matrix(
    features: Sequence[LocationFeatures], cfg: KernelConfig
) -> GramMatrix:
    """Full symmetric similarity matrix over all locations."""
    return GramBasis(features, cfg.chi2_epsilon).gram(cfg)
