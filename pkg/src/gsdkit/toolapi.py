"""Agent-facing request handling.

Requests are JSON documents carrying detections (inline or by file
reference) and optional config overrides; responses are canonical JSON with
the predicted GSD, the confidence report, and a recommended action that
encodes the fallback policy (confidence below 0.5 means the caller should
not trust the estimate). Handlers are pure functions of (request, loaded
calibration) and never raise for bad requests; they raise ToolError, which
carries a machine-readable code.
"""

from __future__ import annotations

import math
from pathlib import Path

from .estimator import EstimatorConfig, estimate_gsd
from .ingest import DetectionSchemaError, canonical_dumps, read_detection_json
from .measurement import area_from_pixels

__all__ = [
    "FALLBACK_THRESHOLD",
    "ToolError",
    "handle_estimate",
    "handle_area",
    "response_json",
]

# Confidence strictly below this recommends falling back.
FALLBACK_THRESHOLD = 0.5

_ESTIMATE_KEYS = {"detections", "detections_path", "config"}
_AREA_KEYS = {"pixel_count", "gsd", "detections", "detections_path", "config"}
_CONFIG_KEYS = {"l_ref", "min_conf", "alpha", "fallback_n", "weighted_kde",
                "gsd_max", "aggregation", "bandwidth"}


class ToolError(Exception):
    """Structured request failure: a code, the offending field, a message."""

    def __init__(self, code: str, field: str, message: str):
        self.code = code
        self.field = field
        self.message = message
        super().__init__(f"{code} at {field or '<request>'}: {message}")

    def to_dict(self) -> dict:
        return {"error": {"code": self.code, "field": self.field,
                          "message": self.message}}


def _require_object(doc, allowed: set[str]) -> dict:
    if not isinstance(doc, dict):
        raise ToolError("schema_violation", "", "request body must be a JSON object")
    unknown = doc.keys() - allowed
    if unknown:
        raise ToolError("schema_violation", sorted(unknown)[0], "unknown field")
    return doc


def _build_config(doc: dict, base: EstimatorConfig) -> EstimatorConfig:
    overrides = doc.get("config", {})
    if not isinstance(overrides, dict):
        raise ToolError("schema_violation", "config", "must be an object")
    unknown = overrides.keys() - _CONFIG_KEYS
    if unknown:
        raise ToolError("schema_violation", f"config.{sorted(unknown)[0]}",
                        "unknown config key")
    try:
        return base.with_overrides(**overrides)
    except (TypeError, ValueError) as exc:
        raise ToolError("schema_violation", "config", str(exc)) from exc


def _load_detections(doc: dict):
    inline = doc.get("detections")
    path = doc.get("detections_path")
    if (inline is None) == (path is None):
        raise ToolError("schema_violation", "detections",
                        "exactly one of 'detections' or 'detections_path' required")
    if inline is not None:
        payload = inline
    else:
        if not isinstance(path, str):
            raise ToolError("schema_violation", "detections_path", "must be a string")
        try:
            payload = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ToolError("io_error", "detections_path", str(exc)) from exc
    try:
        return read_detection_json(payload)
    except DetectionSchemaError as exc:
        raise ToolError("schema_violation", exc.field, exc.message) from exc


def _recommended_action(confidence: float) -> str:
    return "fallback" if confidence < FALLBACK_THRESHOLD else "trust"


def handle_estimate(request: dict, l_ref: float,
                    base_config: EstimatorConfig | None = None) -> dict:
    """Run the pipeline for one request and shape the tool response.

    Identical requests yield identical responses; a zero-detection request
    is a valid response with confidence 0, not an error.
    """
    doc = _require_object(request, _ESTIMATE_KEYS)
    base = base_config if base_config is not None else EstimatorConfig(l_ref=l_ref)
    config = _build_config(doc, base)
    detections = _load_detections(doc)
    estimate = estimate_gsd(detections, config)
    report = estimate.confidence
    diagnostics = report.to_dict()
    diagnostics["p_mode"] = estimate.p_mode
    diagnostics["n_raw"] = estimate.n_raw
    diagnostics["n_filtered"] = estimate.n_filtered
    return {
        "gsd_pred": estimate.gsd_pred,
        "confidence": report.c_final,
        "guard_triggered": report.guard_triggered,
        "path": estimate.path,
        "recommended_action": _recommended_action(report.c_final),
        "diagnostics": diagnostics,
    }


def handle_area(request: dict, l_ref: float,
                base_config: EstimatorConfig | None = None) -> dict:
    """Convert a pixel count to square metres.

    The GSD comes either directly from the request or from estimating the
    supplied detections; in the latter case the pipeline confidence rides
    along and drives the recommended action.
    """
    doc = _require_object(request, _AREA_KEYS)
    pixel_count = doc.get("pixel_count")
    if isinstance(pixel_count, bool) or not isinstance(pixel_count, int):
        raise ToolError("schema_violation", "pixel_count", "must be an integer")
    if pixel_count < 0:
        raise ToolError("schema_violation", "pixel_count", "must be >= 0")

    gsd = doc.get("gsd")
    has_dets = ("detections" in doc) or ("detections_path" in doc)
    if (gsd is None) == (not has_dets):
        raise ToolError("schema_violation", "gsd",
                        "exactly one of 'gsd' or detections required")

    if gsd is not None:
        if isinstance(gsd, bool) or not isinstance(gsd, (int, float)) \
                or not math.isfinite(float(gsd)) or float(gsd) <= 0.0:
            raise ToolError("schema_violation", "gsd", "must be a positive number")
        return {
            "area_m2": area_from_pixels(pixel_count, float(gsd)),
            "gsd_used": float(gsd),
            "confidence": None,
            "recommended_action": "trust",
        }

    est_response = handle_estimate(
        {k: doc[k] for k in ("detections", "detections_path", "config") if k in doc},
        l_ref, base_config)
    gsd_pred = est_response["gsd_pred"]
    confidence = est_response["confidence"]
    if gsd_pred is None:
        return {"area_m2": None, "gsd_used": None, "confidence": confidence,
                "recommended_action": "fallback"}
    return {
        "area_m2": area_from_pixels(pixel_count, gsd_pred),
        "gsd_used": gsd_pred,
        "confidence": confidence,
        "recommended_action": _recommended_action(confidence),
    }


def response_json(response: dict) -> str:
    """Canonical serialisation shared with the interchange format."""
    return canonical_dumps(response)
