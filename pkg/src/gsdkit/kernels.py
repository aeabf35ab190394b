"""Hot numeric kernels: Gaussian-KDE density evaluation and convex quad clipping.

Each kernel exists twice, a numba ``@njit`` version and a pure-numpy
reference. The jitted path is the default; setting ``GSDKIT_NO_NUMBA`` to
``1``/``true``/``yes`` (or running without numba installed) selects the
numpy fallback. Both paths keep a fixed summation order so results are
deterministic within a backend; ``benchmarks/bench_kernels.py`` compares
speed and agreement of the two.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("GSDKIT_NO_NUMBA", "").strip().lower()
_numba = None
if _flag not in ("1", "true", "yes"):
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba = None

NUMBA_ENABLED = _numba is not None


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Gaussian KDE density (unnormalised by the 1/(h*sqrt(2*pi)) constant, which
# does not move the arg-max; weights are expected pre-normalised).
# ---------------------------------------------------------------------------

def _kde_grid_numpy(values: np.ndarray, weights: np.ndarray, h: float,
                    grid: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape[0], dtype=np.float64)
    inv_h = 1.0 / h
    # Chunk over samples to bound the (chunk x grid) scratch matrix; chunks
    # accumulate in a fixed order, keeping the result deterministic.
    chunk = max(1, 2_000_000 // max(grid.shape[0], 1))
    for start in range(0, values.shape[0], chunk):
        v = values[start:start + chunk]
        w = weights[start:start + chunk]
        z = (grid[None, :] - v[:, None]) * inv_h
        out += np.exp(-0.5 * z * z).T @ w
    return out


def _kde_point_numpy(values: np.ndarray, weights: np.ndarray, h: float,
                     x: float) -> float:
    z = (x - values) / h
    return float(np.exp(-0.5 * z * z) @ weights)


if NUMBA_ENABLED:

    @_numba.njit(cache=True)
    def _kde_grid_numba(values, weights, h, grid):  # pragma: no cover - jitted
        out = np.zeros(grid.shape[0], dtype=np.float64)
        inv_h = 1.0 / h
        for j in range(grid.shape[0]):
            x = grid[j]
            acc = 0.0
            for i in range(values.shape[0]):
                z = (x - values[i]) * inv_h
                acc += weights[i] * np.exp(-0.5 * z * z)
            out[j] = acc
        return out

    @_numba.njit(cache=True)
    def _kde_point_numba(values, weights, h, x):  # pragma: no cover - jitted
        inv_h = 1.0 / h
        acc = 0.0
        for i in range(values.shape[0]):
            z = (x - values[i]) * inv_h
            acc += weights[i] * np.exp(-0.5 * z * z)
        return acc


def kde_density_grid(values: np.ndarray, weights: np.ndarray, h: float,
                     grid: np.ndarray) -> np.ndarray:
    """Evaluate sum_i w_i * exp(-((x - v_i)/h)^2 / 2) on every grid point."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if NUMBA_ENABLED:
        return _kde_grid_numba(values, weights, float(h), grid)
    return _kde_grid_numpy(values, weights, float(h), grid)


def kde_density_at(values: np.ndarray, weights: np.ndarray, h: float,
                   x: float) -> float:
    """Scalar companion of :func:`kde_density_grid` for refinement steps."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if NUMBA_ENABLED:
        return float(_kde_point_numba(values, weights, float(h), float(x)))
    return _kde_point_numpy(values, weights, float(h), float(x))


# ---------------------------------------------------------------------------
# Convex quadrilateral intersection (Sutherland-Hodgman clipping).
# Both polygons must be convex and wound counter-clockwise (positive
# shoelace area). Clipping a convex 4-gon against a convex 4-gon yields at
# most 8 vertices; the 16-slot buffers leave headroom.
# ---------------------------------------------------------------------------

def _clip_area_py(subject: np.ndarray, clip: np.ndarray) -> float:
    cur_x = [float(subject[i, 0]) for i in range(4)]
    cur_y = [float(subject[i, 1]) for i in range(4)]
    for e in range(4):
        ax = float(clip[e, 0])
        ay = float(clip[e, 1])
        bx = float(clip[(e + 1) % 4, 0])
        by = float(clip[(e + 1) % 4, 1])
        ex = bx - ax
        ey = by - ay
        nxt_x: list[float] = []
        nxt_y: list[float] = []
        n = len(cur_x)
        if n == 0:
            return 0.0
        for i in range(n):
            px = cur_x[i]
            py = cur_y[i]
            qx = cur_x[(i + 1) % n]
            qy = cur_y[(i + 1) % n]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0.0:
                nxt_x.append(px)
                nxt_y.append(py)
                if sq < 0.0:
                    t = sp / (sp - sq)
                    nxt_x.append(px + t * (qx - px))
                    nxt_y.append(py + t * (qy - py))
            elif sq >= 0.0:
                t = sp / (sp - sq)
                nxt_x.append(px + t * (qx - px))
                nxt_y.append(py + t * (qy - py))
        cur_x = nxt_x
        cur_y = nxt_y
    n = len(cur_x)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += cur_x[i] * cur_y[j] - cur_x[j] * cur_y[i]
    return 0.5 * acc


if NUMBA_ENABLED:

    @_numba.njit(cache=True)
    def _clip_area_numba(subject, clip):  # pragma: no cover - jitted
        cur = np.empty((16, 2), dtype=np.float64)
        nxt = np.empty((16, 2), dtype=np.float64)
        n_cur = 4
        for i in range(4):
            cur[i, 0] = subject[i, 0]
            cur[i, 1] = subject[i, 1]
        for e in range(4):
            ax = clip[e, 0]
            ay = clip[e, 1]
            bx = clip[(e + 1) % 4, 0]
            by = clip[(e + 1) % 4, 1]
            ex = bx - ax
            ey = by - ay
            n_nxt = 0
            if n_cur == 0:
                return 0.0
            for i in range(n_cur):
                px = cur[i, 0]
                py = cur[i, 1]
                qx = cur[(i + 1) % n_cur, 0]
                qy = cur[(i + 1) % n_cur, 1]
                sp = ex * (py - ay) - ey * (px - ax)
                sq = ex * (qy - ay) - ey * (qx - ax)
                if sp >= 0.0:
                    nxt[n_nxt, 0] = px
                    nxt[n_nxt, 1] = py
                    n_nxt += 1
                    if sq < 0.0:
                        t = sp / (sp - sq)
                        nxt[n_nxt, 0] = px + t * (qx - px)
                        nxt[n_nxt, 1] = py + t * (qy - py)
                        n_nxt += 1
                elif sq >= 0.0:
                    t = sp / (sp - sq)
                    nxt[n_nxt, 0] = px + t * (qx - px)
                    nxt[n_nxt, 1] = py + t * (qy - py)
                    n_nxt += 1
            for i in range(n_nxt):
                cur[i, 0] = nxt[i, 0]
                cur[i, 1] = nxt[i, 1]
            n_cur = n_nxt
        if n_cur < 3:
            return 0.0
        acc = 0.0
        for i in range(n_cur):
            j = (i + 1) % n_cur
            acc += cur[i, 0] * cur[j, 1] - cur[j, 0] * cur[i, 1]
        return 0.5 * acc


def convex_intersection_area(subject: np.ndarray, clip: np.ndarray) -> float:
    """Intersection area of two convex CCW quadrilaterals, exact clipping."""
    subject = np.ascontiguousarray(subject, dtype=np.float64)
    clip = np.ascontiguousarray(clip, dtype=np.float64)
    if NUMBA_ENABLED:
        return float(_clip_area_numba(subject, clip))
    return _clip_area_py(subject, clip)


def warmup() -> None:
    """Trigger jit compilation so later calls (and timings) are steady-state."""
    v = np.array([1.0, 2.0, 3.0])
    w = np.full(3, 1.0 / 3.0)
    g = np.linspace(0.0, 4.0, 8)
    kde_density_grid(v, w, 0.5, g)
    kde_density_at(v, w, 0.5, 2.0)
    q = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    convex_intersection_area(q, q)
