"""The estimation pipeline and reference-length calibration.

One call runs threshold -> longer sides -> outlier filter -> mode -> GSD ->
confidence. Fewer than five survivors fall back to the plain median; zero
survivors is a first-class result with confidence 0, not an error, because
callers are agents that must always get a parseable response.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .confidence import ConfidenceReport, score_confidence
from .geometry import longer_side
from .ingest import DetectionSet, canonical_dumps
from .robust_stats import (
    DEFAULT_ALPHA,
    DEFAULT_MIN_CONF,
    KdeResult,
    LengthSample,
    kde_mode,
    outlier_mask,
    threshold_confidence,
)

__all__ = [
    "PATH_KDE",
    "PATH_MEDIAN_FALLBACK",
    "PATH_NO_DETECTIONS",
    "AGGREGATIONS",
    "EstimatorConfig",
    "CalibrationResult",
    "GsdEstimate",
    "calibrate_lref",
    "estimate_gsd",
    "save_calibration",
    "parse_calibration",
]

PATH_KDE = "kde"
PATH_MEDIAN_FALLBACK = "median_fallback"
PATH_NO_DETECTIONS = "no_detections"

# "median"/"mean" replace the KDE mode for ablation sweeps.
AGGREGATIONS = ("kde", "median", "mean")

DEFAULT_FALLBACK_N = 5
DEFAULT_GSD_MAX = 0.3
DEFAULT_GSD_PLAUSIBLE = (0.01, 1.0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Immutable knob set; ablations are plain config sweeps."""

    l_ref: float
    min_conf: float = DEFAULT_MIN_CONF
    alpha: float | None = DEFAULT_ALPHA
    fallback_n: int = DEFAULT_FALLBACK_N
    weighted_kde: bool = False
    gsd_max: float = DEFAULT_GSD_MAX
    aggregation: str = "kde"
    bandwidth: float | None = None
    gsd_plausible: tuple[float, float] = DEFAULT_GSD_PLAUSIBLE

    def __post_init__(self):
        if not (self.l_ref > 0.0 and math.isfinite(self.l_ref)):
            raise ValueError(f"l_ref must be positive and finite, got {self.l_ref}")
        if not (0.0 <= self.min_conf <= 1.0):
            raise ValueError(f"min_conf must be in [0, 1], got {self.min_conf}")
        if self.alpha is not None and self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive or None, got {self.alpha}")
        if self.fallback_n < 1:
            raise ValueError(f"fallback_n must be >= 1, got {self.fallback_n}")
        if self.gsd_max <= 0.0:
            raise ValueError(f"gsd_max must be positive, got {self.gsd_max}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.bandwidth is not None and self.bandwidth <= 0.0:
            raise ValueError(f"bandwidth must be positive or None, got {self.bandwidth}")
        lo, hi = self.gsd_plausible
        if not (0.0 < lo < hi):
            raise ValueError(f"bad plausibility window {self.gsd_plausible}")

    def with_overrides(self, **kwargs) -> "EstimatorConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class CalibrationResult:
    """Reference length in metres plus the KDE diagnostics that produced it."""

    l_ref: float
    n_instances: int
    kde: KdeResult


@dataclass(frozen=True)
class GsdEstimate:
    """Predicted GSD with provenance: counts, path taken, confidence report.

    gsd_pred is present iff path != no_detections and always equals
    l_ref / p_mode exactly.
    """

    gsd_pred: float | None
    p_mode: float | None
    n_raw: int
    n_filtered: int
    path: str
    confidence: ConfidenceReport


def calibrate_lref(annotated_images, *, grid_size: int = 512) -> CalibrationResult:
    """Pool physical lengths (longer side x ground-truth GSD) across images
    and return the unweighted KDE mode over metres.

    No outlier filter runs here; filtering belongs to inference only.
    """
    lengths_m: list[float] = []
    for detection_set, meta in annotated_images:
        if meta.gsd_gt is None:
            continue
        for det in detection_set.detections:
            lengths_m.append(longer_side(det.polygon) * meta.gsd_gt)
    if not lengths_m:
        raise ValueError("no usable annotations for calibration")
    sample = LengthSample(np.asarray(lengths_m))
    result = kde_mode(sample, grid_size=grid_size)
    return CalibrationResult(l_ref=result.mode, n_instances=len(lengths_m), kde=result)


def save_calibration(calibration: CalibrationResult) -> str:
    """Small audit document: {"l_ref", "n_instances", "bandwidth"}."""
    return canonical_dumps({
        "l_ref": float(calibration.l_ref),
        "n_instances": int(calibration.n_instances),
        "bandwidth": float(calibration.kde.bandwidth),
    })


def parse_calibration(text) -> dict:
    """Parse a calibration document; returns the dict after validation."""
    doc = json.loads(text) if isinstance(text, (str, bytes)) else dict(text)
    l_ref = doc.get("l_ref")
    if not isinstance(l_ref, (int, float)) or isinstance(l_ref, bool) \
            or not math.isfinite(float(l_ref)) or float(l_ref) <= 0.0:
        raise ValueError("calibration l_ref must be a positive number")
    doc["l_ref"] = float(l_ref)
    return doc


def estimate_gsd(detections: DetectionSet, config: EstimatorConfig) -> GsdEstimate:
    """Run the full pipeline on one image's detections.

    Every input yields a structured estimate; zero filtered detections is
    the no_detections path with confidence 0.
    """
    n_raw = len(detections.detections)
    kept = threshold_confidence(detections.detections, config.min_conf)

    lengths = np.array([longer_side(d.polygon) for d in kept], dtype=np.float64)
    confs = np.array([d.confidence for d in kept], dtype=np.float64)
    if config.alpha is not None and lengths.size:
        keep = outlier_mask(lengths, config.alpha)
        lengths = lengths[keep]
        confs = confs[keep]
    n_filtered = int(lengths.size)

    if n_filtered == 0:
        return GsdEstimate(
            gsd_pred=None, p_mode=None, n_raw=n_raw, n_filtered=0,
            path=PATH_NO_DETECTIONS,
            confidence=ConfidenceReport.zero(config.l_ref, config.gsd_max),
        )

    if n_filtered < config.fallback_n:
        p_mode = float(np.median(lengths))
        path = PATH_MEDIAN_FALLBACK
    else:
        path = PATH_KDE
        if config.aggregation == "median":
            p_mode = float(np.median(lengths))
        elif config.aggregation == "mean":
            p_mode = float(lengths.mean())
        else:
            sample = LengthSample(lengths, confs if config.weighted_kde else None)
            p_mode = kde_mode(sample, bandwidth=config.bandwidth).mode

    gsd_pred = config.l_ref / p_mode
    report = score_confidence(lengths, confs, p_mode, config)
    return GsdEstimate(gsd_pred=gsd_pred, p_mode=p_mode, n_raw=n_raw,
                       n_filtered=n_filtered, path=path, confidence=report)
