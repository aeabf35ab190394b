"""Annotation parsing and the canonical detection interchange format.

DOTA label text and GSD metadata come in; one canonical JSON document goes
out and back. Canonical serialisation is deterministic (keys sorted, floats
at nine significant digits, newline-terminated) so golden tests and the
tool API can compare bytes.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .geometry import (
    DEGENERATE_AREA,
    ObbDetection,
    ObbPolygon,
    is_convex,
    polygon_area,
)

__all__ = [
    "SOURCES",
    "DetectionSchemaError",
    "DetectionSet",
    "ImageMeta",
    "canonical_dumps",
    "parse_dota_annotation",
    "parse_gsd_meta",
    "read_detection_json",
    "write_detection_json",
    "tile_plan",
]

SOURCES = ("ground_truth", "detector")

# Detectors may overshoot the frame slightly; polygons must stay within this
# fraction of the larger image dimension outside the bounds.
DEFAULT_MARGIN_FRAC = 0.05


class DetectionSchemaError(ValueError):
    """Schema violation in a detection document, naming the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        self.message = message
        super().__init__(f"{field_name}: {message}" if field_name else message)


@dataclass
class DetectionSet:
    """All detections for one image plus dimensions and provenance.

    ``n_skipped`` counts malformed or rejected annotation lines from parsing;
    it is diagnostic metadata and is not serialised.
    """

    image_id: str
    width: int
    height: int
    detections: list[ObbDetection] = field(default_factory=list)
    source: str = "detector"
    n_skipped: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class ImageMeta:
    """Per-image metadata; gsd_gt is metres per pixel or None when unknown."""

    image_id: str
    gsd_gt: float | None = None


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

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
    """Deterministic JSON: sorted keys, floats at 9 significant digits, one
    trailing newline. Re-serialising a parsed document is byte-identical."""
    return json.dumps(_canonicalise(obj), sort_keys=True, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# DOTA text formats
# ---------------------------------------------------------------------------

def _polygon_ok(poly: ObbPolygon) -> bool:
    return polygon_area(poly) > DEGENERATE_AREA and is_convex(poly)


def _within_margin(poly: ObbPolygon, width: int, height: int,
                   margin_frac: float) -> bool:
    m = margin_frac * max(width, height)
    pts = poly.points
    return bool(
        pts[:, 0].min() >= -m and pts[:, 0].max() <= width + m
        and pts[:, 1].min() >= -m and pts[:, 1].max() <= height + m
    )


def parse_dota_annotation(text: str, category_filter: str, *,
                          image_id: str = "",
                          image_width: int | None = None,
                          image_height: int | None = None,
                          margin_frac: float = DEFAULT_MARGIN_FRAC) -> DetectionSet:
    """Parse DOTA label text, keeping only ``category_filter`` objects.

    Object lines are ``x1 y1 x2 y2 x3 y3 x4 y4 category [difficulty]``;
    ``imagesource:`` / ``gsd:`` header lines are ignored. Malformed,
    degenerate, non-convex, or out-of-bounds lines are skipped and counted,
    never fatal. Ground-truth detections carry confidence 1.0. When the
    image dimensions are not supplied they are inferred from the kept
    polygons (label files do not record them).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    detections: list[ObbDetection] = []
    n_skipped = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("imagesource:") or line.startswith("gsd:"):
            continue
        tokens = line.split()
        if len(tokens) < 9:
            n_skipped += 1
            continue
        category = tokens[8]
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            n_skipped += 1
            continue
        if category != category_filter:
            continue
        try:
            poly = ObbPolygon.from_flat(coords)
        except ValueError:
            n_skipped += 1
            continue
        if not _polygon_ok(poly):
            n_skipped += 1
            continue
        detections.append(ObbDetection(polygon=poly, confidence=1.0, label=category))

    if image_width is None or image_height is None:
        hi = 1.0
        for det in detections:
            hi = max(hi, float(det.polygon.points.max()))
        image_width = image_width if image_width is not None else int(math.ceil(hi))
        image_height = image_height if image_height is not None else int(math.ceil(hi))
    else:
        in_bounds = [d for d in detections
                     if _within_margin(d.polygon, image_width, image_height, margin_frac)]
        n_skipped += len(detections) - len(in_bounds)
        detections = in_bounds

    return DetectionSet(image_id=image_id, width=image_width, height=image_height,
                        detections=detections, source="ground_truth",
                        n_skipped=n_skipped)


_GSD_LINE = re.compile(r"^gsd\s*:\s*(\S+)\s*$")


def parse_gsd_meta(text: str, *, image_id: str = "") -> ImageMeta:
    """Extract the first ``gsd:<value>`` line; absence or ``null`` means no GSD."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    for raw in text.splitlines():
        m = _GSD_LINE.match(raw.strip())
        if m is None:
            continue
        token = m.group(1)
        if token.lower() == "null":
            return ImageMeta(image_id=image_id, gsd_gt=None)
        try:
            value = float(token)
        except ValueError:
            return ImageMeta(image_id=image_id, gsd_gt=None)
        if not math.isfinite(value) or value <= 0.0:
            return ImageMeta(image_id=image_id, gsd_gt=None)
        return ImageMeta(image_id=image_id, gsd_gt=value)
    return ImageMeta(image_id=image_id, gsd_gt=None)


# ---------------------------------------------------------------------------
# Detection JSON interchange
# ---------------------------------------------------------------------------

_TOP_KEYS = {"image_id", "width", "height", "source", "detections"}
_DET_KEYS = {"poly", "conf", "label"}


def _require_int(doc: dict, key: str) -> int:
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise DetectionSchemaError(key, "must be an integer")
    return v


def _require_number(value, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DetectionSchemaError(field_name, "must be a number")
    f = float(value)
    if not math.isfinite(f):
        raise DetectionSchemaError(field_name, "must be finite")
    return f


def read_detection_json(document, *,
                        margin_frac: float = DEFAULT_MARGIN_FRAC) -> DetectionSet:
    """Parse and validate a canonical detection document (str, bytes, or dict).

    Every violation raises :class:`DetectionSchemaError` naming the field.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DetectionSchemaError("", f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise DetectionSchemaError("", "document must be a JSON object")
    missing = _TOP_KEYS - doc.keys()
    if missing:
        raise DetectionSchemaError(sorted(missing)[0], "missing required field")
    unknown = doc.keys() - _TOP_KEYS
    if unknown:
        raise DetectionSchemaError(sorted(unknown)[0], "unknown field")

    image_id = doc.get("image_id")
    if not isinstance(image_id, str):
        raise DetectionSchemaError("image_id", "must be a string")
    width = _require_int(doc, "width")
    height = _require_int(doc, "height")
    if width <= 0:
        raise DetectionSchemaError("width", "must be positive")
    if height <= 0:
        raise DetectionSchemaError("height", "must be positive")
    source = doc.get("source")
    if source not in SOURCES:
        raise DetectionSchemaError("source", f"must be one of {SOURCES}")
    raw_dets = doc.get("detections")
    if not isinstance(raw_dets, list):
        raise DetectionSchemaError("detections", "must be a list")

    detections: list[ObbDetection] = []
    for i, item in enumerate(raw_dets):
        where = f"detections[{i}]"
        if not isinstance(item, dict):
            raise DetectionSchemaError(where, "must be an object")
        missing = _DET_KEYS - item.keys()
        if missing:
            raise DetectionSchemaError(f"{where}.{sorted(missing)[0]}",
                                       "missing required field")
        unknown = item.keys() - _DET_KEYS
        if unknown:
            raise DetectionSchemaError(f"{where}.{sorted(unknown)[0]}", "unknown field")
        poly_raw = item["poly"]
        if (not isinstance(poly_raw, list) or len(poly_raw) != 4
                or any(not isinstance(p, list) or len(p) != 2 for p in poly_raw)):
            raise DetectionSchemaError(f"{where}.poly",
                                       "must be four [x, y] corner pairs")
        coords = [_require_number(c, f"{where}.poly") for pair in poly_raw for c in pair]
        poly = ObbPolygon.from_flat(coords)
        if polygon_area(poly) <= DEGENERATE_AREA:
            raise DetectionSchemaError(f"{where}.poly", "degenerate polygon")
        if not is_convex(poly):
            raise DetectionSchemaError(f"{where}.poly", "polygon must be convex")
        if not _within_margin(poly, width, height, margin_frac):
            raise DetectionSchemaError(f"{where}.poly",
                                       "polygon outside image bounds margin")
        conf = _require_number(item["conf"], f"{where}.conf")
        if not (0.0 <= conf <= 1.0):
            raise DetectionSchemaError(f"{where}.conf", "must be in [0, 1]")
        if source == "ground_truth" and conf != 1.0:
            raise DetectionSchemaError(f"{where}.conf",
                                       "ground-truth detections must have confidence 1.0")
        label = item["label"]
        if not isinstance(label, str):
            raise DetectionSchemaError(f"{where}.label", "must be a string")
        detections.append(ObbDetection(polygon=poly, confidence=conf, label=label))

    return DetectionSet(image_id=image_id, width=width, height=height,
                        detections=detections, source=source)


def write_detection_json(detection_set: DetectionSet) -> str:
    """Serialise a DetectionSet to the canonical interchange document."""
    doc = {
        "image_id": detection_set.image_id,
        "width": int(detection_set.width),
        "height": int(detection_set.height),
        "source": detection_set.source,
        "detections": [
            {
                "poly": [[float(x), float(y)] for x, y in det.polygon.points],
                "conf": float(det.confidence),
                "label": det.label,
            }
            for det in detection_set.detections
        ],
    }
    return canonical_dumps(doc)


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------

def _axis_origins(extent: int, tile: int, stride: int) -> list[int]:
    if extent <= tile:
        return [0]
    origins = []
    x = 0
    while True:
        if x + tile >= extent:
            origins.append(extent - tile)
            break
        origins.append(x)
        x += stride
    return origins


def tile_plan(image_width: int, image_height: int, tile_size: int = 1024,
              overlap: int = 200) -> list[tuple[int, int, int, int]]:
    """Plan axis-aligned tiles (x, y, w, h) covering the whole image.

    Stride is ``tile_size - overlap``; the last row/column is shifted inward
    to end exactly on the image boundary. An image smaller than one tile
    gets a single tile of the image size. Integer arithmetic only, so
    external reimplementations can match origins bit-exactly.
    """
    if image_width <= 0 or image_height <= 0:
        raise ValueError("image dimensions must be positive")
    if overlap < 0 or tile_size <= overlap:
        raise ValueError("require tile_size > overlap >= 0")
    stride = tile_size - overlap
    xs = _axis_origins(image_width, tile_size, stride)
    ys = _axis_origins(image_height, tile_size, stride)
    w = min(tile_size, image_width)
    h = min(tile_size, image_height)
    return [(x, y, w, h) for y in ys for x in xs]
