"""Pixel-to-metric conversion for downstream measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "AreaMeasurement",
    "area_from_pixels",
    "length_from_pixels",
    "parse_pixel_counts",
]


@dataclass(frozen=True)
class AreaMeasurement:
    """A converted area; ``area == pixel_count * gsd ** 2`` exactly."""

    pixel_count: int
    gsd: float
    area: float
    confidence_passthrough: float | None = None


def _check_gsd(gsd: float) -> None:
    if not (gsd > 0.0 and math.isfinite(gsd)):
        raise ValueError(f"gsd must be positive and finite, got {gsd}")


def area_from_pixels(pixel_count: int, gsd: float) -> float:
    """Square metres covered by ``pixel_count`` pixels at ``gsd`` m/px."""
    _check_gsd(gsd)
    if pixel_count < 0:
        raise ValueError(f"pixel_count must be >= 0, got {pixel_count}")
    return pixel_count * gsd * gsd


def length_from_pixels(pixel_length: float, gsd: float) -> float:
    """Metres spanned by ``pixel_length`` pixels at ``gsd`` m/px."""
    _check_gsd(gsd)
    if pixel_length < 0:
        raise ValueError(f"pixel_length must be >= 0, got {pixel_length}")
    return pixel_length * gsd


def parse_pixel_counts(text: str) -> list[tuple[str, str, int]]:
    """Parse "image_id object_id pixel_count" lines.

    Blank lines and ``#`` comments are ignored; anything else malformed
    raises with its line number.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    records: list[tuple[str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise ValueError(f"line {lineno}: expected 'image_id object_id pixel_count'")
        try:
            count = int(tokens[2])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: pixel_count must be an integer") from exc
        if count < 0:
            raise ValueError(f"line {lineno}: pixel_count must be >= 0")
        records.append((tokens[0], tokens[1], count))
    return records
