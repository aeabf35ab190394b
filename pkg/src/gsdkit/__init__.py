"""gsdkit: ground sample distance estimation from oriented vehicle detections.

Given oriented-bounding-box vehicle detections for a monocular aerial
image, the pipeline recovers metres-per-pixel scale from the modal vehicle
pixel length and reports a guard-clamped confidence score, so agent callers
can decide whether to trust the measurement.
"""

from .benchmark import (
    EvalRecord,
    EvalReport,
    SyntheticScene,
    ablation_sweep,
    evaluate,
    generate_scene,
    relative_error,
    sample_vehicle_lengths,
)
from .confidence import ConfidenceReport, score_confidence
from .estimator import (
    CalibrationResult,
    EstimatorConfig,
    GsdEstimate,
    calibrate_lref,
    estimate_gsd,
    parse_calibration,
    save_calibration,
)
from .geometry import (
    ObbDetection,
    ObbPolygon,
    longer_side,
    nms_merge,
    polygon_area,
    rotated_iou,
)
from .ingest import (
    DetectionSchemaError,
    DetectionSet,
    ImageMeta,
    canonical_dumps,
    parse_dota_annotation,
    parse_gsd_meta,
    read_detection_json,
    tile_plan,
    write_detection_json,
)
from .measurement import AreaMeasurement, area_from_pixels, length_from_pixels
from .robust_stats import (
    KdeResult,
    LengthSample,
    filter_outliers,
    kde_mode,
    scott_bandwidth,
    threshold_confidence,
)
from .toolapi import ToolError, handle_area, handle_estimate

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AreaMeasurement",
    "CalibrationResult",
    "ConfidenceReport",
    "DetectionSchemaError",
    "DetectionSet",
    "EstimatorConfig",
    "EvalRecord",
    "EvalReport",
    "GsdEstimate",
    "ImageMeta",
    "KdeResult",
    "LengthSample",
    "ObbDetection",
    "ObbPolygon",
    "SyntheticScene",
    "ToolError",
    "ablation_sweep",
    "area_from_pixels",
    "calibrate_lref",
    "canonical_dumps",
    "estimate_gsd",
    "evaluate",
    "filter_outliers",
    "generate_scene",
    "handle_area",
    "handle_estimate",
    "kde_mode",
    "length_from_pixels",
    "longer_side",
    "nms_merge",
    "parse_calibration",
    "parse_dota_annotation",
    "parse_gsd_meta",
    "polygon_area",
    "read_detection_json",
    "relative_error",
    "rotated_iou",
    "sample_vehicle_lengths",
    "save_calibration",
    "score_confidence",
    "scott_bandwidth",
    "threshold_confidence",
    "tile_plan",
    "write_detection_json",
]
