"""Robust statistics for pixel-length samples.

Confidence thresholding, the median-based outlier filter, Scott's-rule
bandwidth, and Gaussian-KDE mode finding. The KDE mode is located on a
512-point grid spanning the data plus three bandwidths, then sharpened by a
golden-section pass inside the winning cell; arg-max ties break toward the
smaller abscissa, which maps to the coarser (more conservative) scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import ObbDetection

__all__ = [
    "LengthSample",
    "KdeResult",
    "threshold_confidence",
    "filter_outliers",
    "outlier_mask",
    "scott_bandwidth",
    "kde_mode",
]

DEFAULT_MIN_CONF = 0.1
DEFAULT_ALPHA = 1.5
DEFAULT_GRID_SIZE = 512
GRID_SPAN_BANDWIDTHS = 3.0
_GOLDEN_ITERS = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0
# Relative slack for arg-max ties; mathematically equal peaks can differ by
# a few ulps after the kernel sum.
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class LengthSample:
    """Strictly positive lengths with optional per-value weights in [0, 1]."""

    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size and (not np.all(np.isfinite(v)) or np.any(v <= 0.0)):
            raise ValueError("values must be finite and strictly positive")
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if w.shape != v.shape:
                raise ValueError("weights must match values in length")
            if not np.all(np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
                raise ValueError("weights must be finite and in [0, 1]")
            if w.size and not np.any(w > 0.0):
                raise ValueError("at least one weight must be positive")
            object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class KdeResult:
    """Mode location plus the bandwidth and grid that produced it.

    ``bandwidth`` is 0.0 for the degenerate all-identical sample, where no
    grid search runs and the mode is the shared value.
    """

    mode: float
    bandwidth: float
    grid_lo: float
    grid_hi: float
    n_evaluations: int


def threshold_confidence(detections: list[ObbDetection],
                         min_conf: float = DEFAULT_MIN_CONF) -> list[ObbDetection]:
    """Keep detections with confidence >= min_conf, preserving order."""
    if not (0.0 <= min_conf <= 1.0):
        raise ValueError(f"min_conf must be in [0, 1], got {min_conf}")
    return [d for d in detections if d.confidence >= min_conf]


def outlier_mask(lengths, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Boolean keep-mask for the one-pass median filter: P <= alpha * median.

    The median is computed once on the unfiltered input (even-length median
    is the mean of the two central order statistics).
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    arr = np.asarray(lengths, dtype=np.float64).ravel()
    if arr.size == 0:
        return np.zeros(0, dtype=bool)
    cutoff = alpha * float(np.median(arr))
    return arr <= cutoff


def filter_outliers(lengths, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Drop lengths above alpha times the median; empty input stays empty."""
    arr = np.asarray(lengths, dtype=np.float64).ravel()
    if arr.size == 0:
        return arr.copy()
    return arr[outlier_mask(arr, alpha)]


def _weighted_moments(v: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Weighted mean, unbiased variance (reliability weights), effective N."""
    sw = float(np.sum(w))
    sw2 = float(np.sum(w * w))
    mean = float(np.dot(w, v)) / sw
    denom = sw - sw2 / sw
    if denom <= 0.0:
        raise ValueError("zero-variance sample")
    var = float(np.dot(w, (v - mean) ** 2)) / denom
    n_eff = sw * sw / sw2
    return mean, var, n_eff


def _scott(v: np.ndarray, w: np.ndarray | None) -> float:
    n = v.size
    if n < 2:
        raise ValueError("need at least 2 values for bandwidth selection")
    if w is None:
        sigma = float(np.std(v, ddof=1))
        n_eff = float(n)
    else:
        _, var, n_eff = _weighted_moments(v, w)
        sigma = math.sqrt(var)
    if sigma == 0.0:
        raise ValueError("zero-variance sample")
    return sigma * n_eff ** (-0.2)


def scott_bandwidth(sample: LengthSample) -> float:
    """h = sigma_hat * N^(-1/5); sample std uses the N-1 denominator.

    Weighted samples use weighted mean/variance with the effective sample
    size (sum w)^2 / sum w^2 in place of N.
    """
    return _scott(sample.values, sample.weights)


def _golden_max(f, lo: float, hi: float, iters: int = _GOLDEN_ITERS):
    a, b = lo, hi
    span = b - a
    c = a + _INVPHI2 * span
    d = a + _INVPHI * span
    fc = f(c)
    fd = f(d)
    evals = 2
    for _ in range(iters):
        if fc >= fd:  # prefer the left interval on ties
            b, d, fd = d, c, fc
            span = b - a
            c = a + _INVPHI2 * span
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            span = b - a
            d = a + _INVPHI * span
            fd = f(d)
        evals += 1
    if fc >= fd:
        return c, fc, evals
    return d, fd, evals


def kde_mode(sample: LengthSample, *, grid_size: int = DEFAULT_GRID_SIZE,
             bandwidth: float | None = None) -> KdeResult:
    """Arg-max of the Gaussian KDE over the sample.

    The density is the (weight-normalised) sum of Gaussian kernels with
    Scott's-rule bandwidth unless ``bandwidth`` overrides it. All-identical
    samples short-circuit to that value with bandwidth 0. Equal weights are
    collapsed to the unweighted path so both give identical results.
    """
    v = sample.values
    n = v.size
    if n == 0:
        raise ValueError("empty sample")
    w = sample.weights
    if w is not None and np.all(w == w[0]):
        w = None
    v_min = float(v.min())
    v_max = float(v.max())
    if v_min == v_max:
        return KdeResult(mode=v_min, bandwidth=0.0, grid_lo=v_min, grid_hi=v_min,
                         n_evaluations=0)
    h = float(bandwidth) if bandwidth is not None else _scott(v, w)
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if w is None:
        wn = np.full(n, 1.0 / n)
    else:
        wn = w / float(np.sum(w))

    lo = v_min - GRID_SPAN_BANDWIDTHS * h
    hi = v_max + GRID_SPAN_BANDWIDTHS * h
    grid = np.linspace(lo, hi, grid_size)
    density = kernels.kde_density_grid(v, wn, h, grid)
    d_max = float(density.max())
    idx = int(np.flatnonzero(density >= d_max * (1.0 - _TIE_RTOL))[0])
    evals = grid_size

    def point_density(x: float) -> float:
        return kernels.kde_density_at(v, wn, h, x)

    best_x = float(grid[idx])
    best_f = point_density(best_x)
    evals += 1
    ref_lo = float(grid[max(idx - 1, 0)])
    ref_hi = float(grid[min(idx + 1, grid_size - 1)])
    x_ref, f_ref, used = _golden_max(point_density, ref_lo, ref_hi)
    evals += used
    if f_ref > best_f:
        best_x = float(x_ref)

    return KdeResult(mode=best_x, bandwidth=h, grid_lo=float(grid[0]),
                     grid_hi=float(grid[-1]), n_evaluations=evals)
