"""Tiled detection and canonical JSON output.

The adapter reads an image, runs the detector on each planned tile,
translates tile-local boxes into image coordinates, merges duplicates from
tile overlaps with rotated NMS, filters to the configured categories, and
writes the canonical detection document (sorted keys, floats at nine
significant digits, newline-terminated) atomically.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from shapely.geometry import Polygon

from .backends import CLASSICAL_MODEL, load_backend
from .tiling import tile_plan

__all__ = ["AdapterConfig", "detect_image", "write_detection_file",
           "rotated_nms"]

NMS_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class AdapterConfig:
    model_path: str = CLASSICAL_MODEL
    tile_size: int = 1024
    overlap: int = 200
    min_conf: float = 0.1
    category_names: tuple[str, ...] = ("small-vehicle",)

    def __post_init__(self):
        if self.overlap < 0 or self.tile_size <= self.overlap:
            raise ValueError("require tile_size > overlap >= 0")
        if not (0.0 <= self.min_conf <= 1.0):
            raise ValueError(f"min_conf must be in [0, 1], got {self.min_conf}")
        if not self.category_names:
            raise ValueError("at least one category name required")
        object.__setattr__(self, "category_names", tuple(self.category_names))


def rotated_nms(detections, iou_threshold: float = NMS_IOU_THRESHOLD):
    """Greedy confidence-ordered suppression on (corners, conf, label) rows."""
    order = sorted(range(len(detections)), key=lambda i: -detections[i][1])
    polygons = []
    for corners, _, _ in detections:
        poly = Polygon(corners)
        polygons.append(poly if poly.is_valid else poly.buffer(0))
    kept: list[int] = []
    for i in order:
        ok = True
        for j in kept:
            inter = polygons[i].intersection(polygons[j]).area
            union = polygons[i].area + polygons[j].area - inter
            if union > 0.0 and inter / union > iou_threshold:
                ok = False
                break
        if ok:
            kept.append(i)
    return [detections[i] for i in kept]


def _canonicalise(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite number in canonical JSON")
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _canonicalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonicalise(v) for v in obj]
    raise TypeError(f"cannot canonicalise {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    return json.dumps(_canonicalise(obj), sort_keys=True,
                      separators=(",", ":")) + "\n"


def detect_image(image_path: str, config: AdapterConfig,
                 image_id: str | None = None) -> dict:
    """Run the detector over the tiled image and build the detection doc.

    Zero detections is a valid result (empty list), not an error.
    """
    image = cv2.imread(str(image_path), cv2.IMREAD_COLOR)
    if image is None:
        raise RuntimeError(f"cannot read image {image_path}")
    height, width = image.shape[:2]
    backend = load_backend(config.model_path, config.category_names[0])

    raw = []
    for x, y, w, h in tile_plan(width, height, config.tile_size, config.overlap):
        tile = image[y:y + h, x:x + w]
        for corners, conf, label in backend(tile):
            if conf < config.min_conf:
                continue
            if label not in config.category_names:
                continue
            shifted = np.asarray(corners, dtype=np.float64) + (float(x), float(y))
            raw.append((shifted, float(conf), label))

    merged = rotated_nms(raw, NMS_IOU_THRESHOLD)
    return {
        "image_id": image_id if image_id is not None else Path(image_path).stem,
        "width": int(width),
        "height": int(height),
        "source": "detector",
        "detections": [
            {
                "poly": [[float(px), float(py)] for px, py in corners],
                "conf": conf,
                "label": label,
            }
            for corners, conf, label in merged
        ],
    }


def write_detection_file(document: dict, out_path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = canonical_dumps(document)
    fd, tmp_name = tempfile.mkstemp(dir=out.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
        os.replace(tmp_name, out)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
