"""Detector backends.

A backend maps a BGR tile to raw detections: (corners (4, 2) in tile
coordinates, confidence, label). Two implementations:

* ``classical``: threshold + contours + minAreaRect via OpenCV. No weights
  needed, so the adapter is testable end to end; confidence is the fill
  ratio of the contour inside its box.
* ultralytics OBB: any user-supplied checkpoint (requires the optional
  ``ultralytics`` package). No accuracy promise is made for a given
  checkpoint; label vocabulary comes from the model.
"""

from __future__ import annotations

import cv2
import numpy as np

__all__ = ["CLASSICAL_MODEL", "load_backend"]

CLASSICAL_MODEL = "classical"

# Contours below this area (px^2) are sensor noise, not vehicles.
MIN_CONTOUR_AREA = 20.0


class ClassicalBackend:
    """Dark-blob detector: Otsu threshold, external contours, minAreaRect."""

    def __init__(self, label: str):
        self.label = label

    def __call__(self, tile_bgr: np.ndarray):
        gray = cv2.cvtColor(tile_bgr, cv2.COLOR_BGR2GRAY)
        # Skip blank tiles: Otsu on a constant image invents a split.
        if int(gray.max()) - int(gray.min()) < 16:
            return []
        _, binary = cv2.threshold(gray, 0, 255,
                                  cv2.THRESH_BINARY_INV + cv2.THRESH_OTSU)
        contours, _ = cv2.findContours(binary, cv2.RETR_EXTERNAL,
                                       cv2.CHAIN_APPROX_SIMPLE)
        detections = []
        for contour in contours:
            area = cv2.contourArea(contour)
            if area < MIN_CONTOUR_AREA:
                continue
            rect = cv2.minAreaRect(contour)
            (_, _), (w, h), _ = rect
            if w <= 0.0 or h <= 0.0:
                continue
            corners = cv2.boxPoints(rect).astype(np.float64)
            fill = float(area) / float(w * h)
            conf = float(min(max(fill, 0.0), 1.0))
            detections.append((corners, conf, self.label))
        return detections


class UltralyticsBackend:
    """Thin wrapper over an ultralytics OBB checkpoint."""

    def __init__(self, model_path: str):
        try:
            from ultralytics import YOLO
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError(
                "the 'ultralytics' package is required for model inference; "
                "install obbadapter[yolo]") from exc
        self.model = YOLO(model_path)

    def __call__(self, tile_bgr: np.ndarray):  # pragma: no cover - needs weights
        results = self.model.predict(tile_bgr, verbose=False)
        detections = []
        for result in results:
            obb = getattr(result, "obb", None)
            if obb is None:
                continue
            corners = obb.xyxyxyxy.cpu().numpy()
            confs = obb.conf.cpu().numpy()
            classes = obb.cls.cpu().numpy().astype(int)
            for quad, conf, cls in zip(corners, confs, classes):
                label = result.names.get(int(cls), str(int(cls)))
                detections.append((np.asarray(quad, dtype=np.float64),
                                   float(conf), label))
        return detections


def load_backend(model_path: str, label: str):
    """``classical`` selects the built-in backend; anything else is treated
    as an ultralytics checkpoint path."""
    if model_path == CLASSICAL_MODEL:
        return ClassicalBackend(label)
    return UltralyticsBackend(model_path)
