"""Tile planning for large images.

Integer arithmetic identical to the estimation pipeline's planner: stride
is tile_size - overlap, the last row/column shifts inward to end on the
image boundary, and an image smaller than one tile yields a single tile of
the image size. Origins must match the pipeline bit-exactly so detections
translate onto the same coordinates (the cross-package test enforces it).
"""

from __future__ import annotations

__all__ = ["tile_plan"]


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
    """Axis-aligned tiles (x, y, w, h) covering every pixel of the image."""
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
