"""Structural similarity between grids and distances between stencils.

SSIM follows Wang et al. with a uniform square sliding window (stride 1)
instead of the Gaussian weighting: the mean over all windows of

    (2 mu_a mu_b + C1)(2 sigma_ab + C2)
    -----------------------------------
    (mu_a^2 + mu_b^2 + C1)(sigma_a^2 + sigma_b^2 + C2)

with C1 = (k1 R)^2, C2 = (k2 R)^2 and R the dynamic range over the union
of both grids (forecasts can overshoot the reference range, so R is
computed jointly).

References
----------
.. [1] Z. Wang, A. C. Bovik, H. R. Sheikh and E. P. Simoncelli, "Image
   quality assessment: from error visibility to structural similarity",
   IEEE Trans. Image Process. 13 (2004) 600-612.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .embedding import FeatureParams
from .grid import SpatioTemporalGrid


@dataclass(frozen=True)
class SSIMConfig:
    """Window size, stabilizer constants, and optional fixed dynamic range."""

    window: int = 8
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float | None = None  # None: max - min over both grids

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"k1 and k2 must be positive, got {self.k1}, {self.k2}")
        if self.dynamic_range is not None and not self.dynamic_range > 0:
            raise ValueError(
                f"dynamic_range must be positive, got {self.dynamic_range}"
            )


def _window_means(x: np.ndarray, window: int) -> np.ndarray:
    return sliding_window_view(x, (window, window)).mean(axis=(2, 3))


def ssim(a: SpatioTemporalGrid, b: SpatioTemporalGrid,
         cfg: SSIMConfig = SSIMConfig()) -> float:
    """Mean structural similarity between two equally shaped grids.

    Exactly 1.0 for identical grids and symmetric in its arguments; values
    lie in [-1, 1]. Two grids that are the same constant everywhere have
    zero joint range and compare as identical.
    """
    x = a.values
    y = b.values
    if x.shape != y.shape:
        raise ValueError(f"grid shapes differ: {x.shape} vs {y.shape}")
    if cfg.window > min(x.shape):
        raise ValueError(
            f"window {cfg.window} exceeds smallest grid extent {min(x.shape)}"
        )
    if cfg.dynamic_range is not None:
        dynamic_range = cfg.dynamic_range
    else:
        lo = min(x.min(), y.min())
        hi = max(x.max(), y.max())
        dynamic_range = hi - lo
        if dynamic_range == 0:
            # Both grids equal the same constant everywhere.
            return 1.0
    c1 = (cfg.k1 * dynamic_range) ** 2
    c2 = (cfg.k2 * dynamic_range) ** 2

    w = cfg.window
    mu_x = _window_means(x, w)
    mu_y = _window_means(y, w)
    # Var and covariance via E[uv] - E[u]E[v]; the elementwise product
    # x*y is commutative, which keeps ssim(a, b) == ssim(b, a) exactly.
    var_x = _window_means(x * x, w) - mu_x * mu_x
    var_y = _window_means(y * y, w) - mu_y * mu_y
    cov = _window_means(x * y, w) - mu_x * mu_y
    score = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(np.mean(score))


def distance_euclidean(p: FeatureParams, p_star: FeatureParams) -> float:
    """Euclidean distance between two stencil quadruples."""
    d = np.subtract(p.as_tuple(), p_star.as_tuple(), dtype=np.float64)
    return math.sqrt(float(np.dot(d, d)))


def distance_manhattan(p: FeatureParams, p_star: FeatureParams) -> float:
    """Manhattan distance between two stencil quadruples."""
    d = np.subtract(p.as_tuple(), p_star.as_tuple(), dtype=np.float64)
    return float(np.sum(np.abs(d)))
