"""Composite confidence scoring with the hard resolution guard.

Four sub-scores in [0, 1] combine by a fixed weighted sum, then a guard
clamps the result to at most 0.3 whenever the modal pixel length falls
below l_ref / gsd_max (too coarse for the reference object to be measured
reliably). The guard threshold rescales automatically when l_ref is
recalibrated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .estimator import EstimatorConfig

__all__ = ["ConfidenceReport", "score_confidence"]

W_SUFFICIENCY = 0.35
W_CONCENTRATION = 0.35
W_QUALITY = 0.20
W_ANOMALY = 0.10

# Sample count at which the sufficiency score saturates.
SUFFICIENCY_SATURATION = 20
# Coefficient-of-variation scale: CV >= 0.5 zeroes the concentration score.
CONCENTRATION_CV_SCALE = 0.5
GUARD_CEILING = 0.3


@dataclass(frozen=True)
class ConfidenceReport:
    """Sub-scores, raw composite, and the guard-clamped final score."""

    s_sufficiency: float
    s_concentration: float
    s_quality: float
    s_anomaly: float
    c_raw: float
    c_final: float
    guard_triggered: bool
    p_thresh: float

    @classmethod
    def zero(cls, l_ref: float, gsd_max: float) -> "ConfidenceReport":
        """The no-detections report: every score is 0, guard untriggered."""
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False, l_ref / gsd_max)

    def to_dict(self) -> dict:
        return {
            "s_sufficiency": self.s_sufficiency,
            "s_concentration": self.s_concentration,
            "s_quality": self.s_quality,
            "s_anomaly": self.s_anomaly,
            "c_raw": self.c_raw,
            "c_final": self.c_final,
            "guard_triggered": self.guard_triggered,
            "p_thresh": self.p_thresh,
        }


def score_confidence(filtered_lengths, detection_confs, p_mode: float,
                     config: "EstimatorConfig") -> ConfidenceReport:
    """Score one estimate from its filtered lengths and detector confidences.

    Sub-scores:
      * sufficiency: min(1, n / 20), saturating where accuracy plateaus.
      * concentration: max(0, 1 - CV / 0.5) with CV = std/mean of the
        filtered lengths (0 for a single length).
      * quality: median detector confidence.
      * anomaly: 1 if the implied GSD lies in the plausible window, else 0.
    """
    if p_mode <= 0.0:
        raise ValueError(f"p_mode must be positive, got {p_mode}")
    lengths = np.asarray(filtered_lengths, dtype=np.float64).ravel()
    confs = np.asarray(detection_confs, dtype=np.float64).ravel()
    n = lengths.size

    s_sufficiency = min(1.0, n / SUFFICIENCY_SATURATION)

    if n >= 2:
        mean = float(lengths.mean())
        cv = float(np.std(lengths, ddof=1)) / mean if mean > 0.0 else 0.0
    else:
        cv = 0.0
    s_concentration = max(0.0, 1.0 - cv / CONCENTRATION_CV_SCALE)

    s_quality = float(np.median(confs)) if confs.size else 0.0

    implied_gsd = config.l_ref / p_mode
    lo, hi = config.gsd_plausible
    s_anomaly = 1.0 if lo <= implied_gsd <= hi else 0.0

    c_raw = (W_SUFFICIENCY * s_sufficiency + W_CONCENTRATION * s_concentration
             + W_QUALITY * s_quality + W_ANOMALY * s_anomaly)

    p_thresh = config.l_ref / config.gsd_max
    guard_triggered = p_mode < p_thresh
    c_final = min(c_raw, GUARD_CEILING) if guard_triggered else c_raw

    return ConfidenceReport(
        s_sufficiency=s_sufficiency,
        s_concentration=s_concentration,
        s_quality=s_quality,
        s_anomaly=s_anomaly,
        c_raw=c_raw,
        c_final=c_final,
        guard_triggered=guard_triggered,
        p_thresh=p_thresh,
    )
