"""Two-dimensional Gaussian class worlds, Bayes posteriors and decision rasters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianClassSpec:
    """Isotropic Gaussian per class. Row ``c`` of ``means`` is class ``c``."""

    means: tuple[tuple[float, float], ...]
    sigmas: tuple[float, ...]
    priors: tuple[float, ...]

    def __post_init__(self):
        k = len(self.means)
        if k < 1 or len(self.sigmas) != k or len(self.priors) != k:
            raise ValueError("means, sigmas and priors must have one entry per class")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError(f"sigmas must be positive, got {self.sigmas}")
        if any(p < 0 for p in self.priors) or abs(sum(self.priors) - 1.0) > 1e-9:
            raise ValueError(f"priors must be nonnegative and sum to 1, got {self.priors}")

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @classmethod
    def symmetric(cls, sigma: float, offset: float = 1.0) -> "GaussianClassSpec":
        """Class 0 at (-offset, -offset), class 1 at (+offset, +offset), equal priors."""
        return cls(((-offset, -offset), (offset, offset)), (sigma, sigma), (0.5, 0.5))


def separable_spec() -> GaussianClassSpec:
    return GaussianClassSpec.symmetric(0.5)


def overlap_spec() -> GaussianClassSpec:
    return GaussianClassSpec.symmetric(1.0)


def sample_mixture(spec: GaussianClassSpec, n_per_class: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Exactly ``n_per_class`` points per class, classes in order."""
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c, (mu, sigma) in enumerate(zip(spec.means, spec.sigmas)):
        xs.append(np.asarray(mu) + sigma * rng.standard_normal((n_per_class, 2)))
        ys.append(np.full(n_per_class, c, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def analytic_posterior(spec: GaussianClassSpec, points) -> np.ndarray:
    """Bayes posterior p(c | x); shape [N, K] for [N, 2] input, [K] for one point."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    means = np.asarray(spec.means, dtype=np.float64)
    sig2 = np.asarray(spec.sigmas, dtype=np.float64) ** 2
    with np.errstate(divide="ignore"):
        log_prior = np.log(np.asarray(spec.priors, dtype=np.float64))
    sq = ((pts[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    # 2-D isotropic normal: the 1/sigma^2 factor matters only when sigmas differ
    logits = log_prior - np.log(sig2) - sq / (2.0 * sig2)
    logits -= logits.max(axis=1, keepdims=True)
    post = np.exp(logits)
    post /= post.sum(axis=1, keepdims=True)
    return post[0] if single else post


def posterior_margin(spec: GaussianClassSpec, points):
    """|p(c0|x) - p(c1|x)|; 0 where the two classes are indistinguishable."""
    if spec.num_classes != 2:
        raise ValueError("posterior_margin is defined for two-class worlds only")
    post = analytic_posterior(spec, points)
    return np.abs(post[..., 0] - post[..., 1])


def overlap_score(samples, spec: GaussianClassSpec, tau: float = 0.5) -> float:
    """Fraction of samples whose posterior margin is below ``tau``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    pts = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("overlap_score needs at least one sample")
    return float(np.mean(posterior_margin(spec, pts) < tau))


@dataclass(frozen=True)
class SurfaceRaster:
    """Classifier evaluated on cell centres.

    ``classes[j, i]`` and ``scores[j, i]`` belong to the cell in column ``i``
    (x ascending) and row ``j`` (y ascending). Class -1 marks an exact tie.
    """

    bounds: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    resolution: int
    classes: np.ndarray
    scores: np.ndarray

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return cell_centers(self.bounds, self.resolution)


def cell_centers(bounds, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    xmin, xmax, ymin, ymax = bounds
    i = np.arange(resolution) + 0.5
    return xmin + i * (xmax - xmin) / resolution, ymin + i * (ymax - ymin) / resolution


def rasterize_surface(classifier, bounds=(-3.0, 3.0, -3.0, 3.0), resolution: int = 200) -> SurfaceRaster:
    """``classifier.decide(points)`` must return (classes, signed scores)."""
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    xs, ys = cell_centers(bounds, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    classes, scores = classifier.decide(pts)
    shape = (resolution, resolution)
    return SurfaceRaster(tuple(float(b) for b in bounds), resolution,
                         np.asarray(classes).reshape(shape), np.asarray(scores, dtype=np.float64).reshape(shape))


def boundary_angle(w, normal=(1.0, 1.0)) -> float:
    """Unsigned angle in degrees between a linear decision normal and the Bayes normal."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n = np.asarray(normal, dtype=np.float64)
    if w.shape != (2,):
        raise ValueError(f"boundary_angle expects a 2-D weight vector, got shape {w.shape}")
    norm = np.linalg.norm(w)
    if norm == 0.0:
        raise ValueError("boundary_angle is undefined for a zero weight vector")
    # atan2 stays accurate near 0 degrees where acos loses half the digits
    cross = abs(float(w[0] * n[1] - w[1] * n[0]))
    return math.degrees(math.atan2(cross, abs(float(w @ n))))
