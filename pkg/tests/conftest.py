import math

import numpy as np
import pytest

from gsdkit import kernels
from gsdkit.geometry import ObbDetection, ObbPolygon


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the jitted kernels up front so in-test timings are steady-state.
    kernels.warmup()


def make_rect(cx: float, cy: float, long_px: float, short_px: float,
              theta: float = 0.0) -> ObbPolygon:
    """Axis-aligned rectangle rotated by theta about its centre."""
    hl, hs = 0.5 * long_px, 0.5 * short_px
    corners = np.array([[-hl, -hs], [hl, -hs], [hl, hs], [-hl, hs]])
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return ObbPolygon(corners @ rot.T + np.array([cx, cy]))


def make_detection(cx=0.0, cy=0.0, long_px=40.0, short_px=18.0, theta=0.0,
                   conf=0.9, label="small-vehicle") -> ObbDetection:
    return ObbDetection(polygon=make_rect(cx, cy, long_px, short_px, theta),
                        confidence=conf, label=label)
