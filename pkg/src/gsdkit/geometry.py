"""Oriented bounding box arithmetic.

Boxes are convex quadrilaterals given by four pixel-coordinate corners in a
consistent winding order. Side length averages opposite edges so
hand-annotated near-parallelograms measure sensibly; overlap uses exact
convex clipping (no rasterisation); duplicate suppression is greedy
confidence-ordered NMS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "DEGENERATE_AREA",
    "ObbPolygon",
    "ObbDetection",
    "polygon_area",
    "is_convex",
    "longer_side",
    "rotated_iou",
    "nms_merge",
    "translate",
]

# Quadrilaterals with |shoelace area| at or below this are degenerate.
DEGENERATE_AREA = 1e-9


@dataclass(frozen=True, eq=False)
class ObbPolygon:
    """Four corner points, array of shape (4, 2), finite coordinates.

    Coordinates may be negative (tile offsets shift them); degeneracy and
    convexity are checked by the operations and at ingest, not here.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (4, 2):
            raise ValueError(f"expected 4 corner points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polygon coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_flat(cls, coords) -> "ObbPolygon":
        """Build from a flat [x1, y1, x2, y2, x3, y3, x4, y4] sequence."""
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape != (8,):
            raise ValueError(f"expected 8 coordinates, got shape {arr.shape}")
        return cls(arr.reshape(4, 2))


@dataclass(frozen=True, eq=False)
class ObbDetection:
    """One oriented detection: polygon, detector confidence, category label."""

    polygon: ObbPolygon
    confidence: float
    label: str

    def __post_init__(self):
        c = float(self.confidence)
        if not (0.0 <= c <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {c}")
        object.__setattr__(self, "confidence", c)


def _signed_area(points: np.ndarray) -> float:
    # Sequential shoelace, term order identical to the clipping kernels so
    # that intersection-of-self reproduces the area bitwise (IoU exactly 1).
    acc = 0.0
    n = points.shape[0]
    for i in range(n):
        j = (i + 1) % n
        acc += float(points[i, 0]) * float(points[j, 1]) \
            - float(points[j, 0]) * float(points[i, 1])
    return 0.5 * acc


def polygon_area(polygon: ObbPolygon) -> float:
    """Unsigned shoelace area in square pixels."""
    return abs(_signed_area(polygon.points))


def is_convex(polygon: ObbPolygon) -> bool:
    """True when all corner cross products share a sign (collinear allowed)."""
    p = polygon.points
    e = np.roll(p, -1, axis=0) - p
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool(np.all(cross >= 0.0) or np.all(cross <= 0.0))


def _ccw_points(polygon: ObbPolygon) -> np.ndarray:
    pts = polygon.points
    if _signed_area(pts) < 0.0:
        return pts[::-1].copy()
    return pts


def longer_side(polygon: ObbPolygon) -> float:
    """Longer side of the box in pixels, averaging opposite edge pairs."""
    if polygon_area(polygon) <= DEGENERATE_AREA:
        raise ValueError("degenerate polygon")
    p = polygon.points
    d = np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1)
    return float(max(0.5 * (d[0] + d[2]), 0.5 * (d[1] + d[3])))


def rotated_iou(a: ObbPolygon, b: ObbPolygon) -> float:
    """Intersection-over-union of two convex boxes via exact clipping."""
    pts_a = _ccw_points(a)
    pts_b = _ccw_points(b)
    # Areas from the same CCW point order the kernel clips with, so an
    # identical pair yields inter == area and the ratio is exactly 1.0.
    area_a = _signed_area(pts_a)
    area_b = _signed_area(pts_b)
    if area_a <= DEGENERATE_AREA or area_b <= DEGENERATE_AREA:
        raise ValueError("degenerate polygon")
    inter = kernels.convex_intersection_area(pts_a, pts_b)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def translate(polygon: ObbPolygon, dx: float, dy: float) -> ObbPolygon:
    """Shift all corners by (dx, dy); used to map tile-local boxes to image coordinates."""
    return ObbPolygon(polygon.points + np.array([dx, dy], dtype=np.float64))


def nms_merge(detections: list[ObbDetection],
              iou_threshold: float = 0.5) -> list[ObbDetection]:
    """Greedy non-maximum suppression in descending confidence order.

    A detection is kept iff its rotated IoU with every already-kept
    detection is <= iou_threshold. Confidence ties break by input order, so
    the result is deterministic. Output is sorted by descending confidence.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    if not detections:
        return []
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    # Axis-aligned bounds give a cheap reject: disjoint bounds mean IoU 0.
    bounds = np.empty((len(detections), 4), dtype=np.float64)
    for i, det in enumerate(detections):
        pts = det.polygon.points
        bounds[i] = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
    kept: list[int] = []
    for i in order:
        ok = True
        for j in kept:
            if (bounds[i, 0] > bounds[j, 2] or bounds[j, 0] > bounds[i, 2]
                    or bounds[i, 1] > bounds[j, 3] or bounds[j, 1] > bounds[i, 3]):
                continue
            if rotated_iou(detections[i].polygon, detections[j].polygon) > iou_threshold:
                ok = False
                break
        if ok:
            kept.append(i)
    return [detections[i] for i in kept]
