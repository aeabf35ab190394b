"""Backend selection and numba/numpy agreement for the hot kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gsdkit import kernels


@pytest.fixture
def kde_workload():
    rng = np.random.default_rng(7)
    values = rng.uniform(10.0, 120.0, 500)
    weights = rng.uniform(0.1, 1.0, 500)
    weights /= weights.sum()
    grid = np.linspace(0.0, 130.0, 512)
    return values, weights, 3.7, grid


def test_grid_density_matches_reference(kde_workload):
    values, weights, h, grid = kde_workload
    got = kernels.kde_density_grid(values, weights, h, grid)
    want = kernels._kde_grid_numpy(values, weights, h, grid)
    np.testing.assert_allclose(got, want, rtol=1e-10)


def test_point_density_matches_grid(kde_workload):
    values, weights, h, grid = kde_workload
    dens = kernels.kde_density_grid(values, weights, h, grid)
    for j in (0, 100, 511):
        at = kernels.kde_density_at(values, weights, h, float(grid[j]))
        assert at == pytest.approx(dens[j], rel=1e-10)


def test_grid_density_deterministic(kde_workload):
    values, weights, h, grid = kde_workload
    a = kernels.kde_density_grid(values, weights, h, grid)
    b = kernels.kde_density_grid(values, weights, h, grid)
    assert np.array_equal(a, b)


def test_clip_backends_agree_bitwise():
    rng = np.random.default_rng(11)
    for _ in range(200):
        c1 = rng.uniform(0.0, 50.0, 2)
        c2 = rng.uniform(0.0, 50.0, 2)
        w1, h1, w2, h2 = rng.uniform(2.0, 20.0, 4)
        t1, t2 = rng.uniform(0.0, np.pi, 2)

        def quad(c, w, h, t):
            hw, hh = 0.5 * w, 0.5 * h
            base = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
            rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
            return base @ rot.T + c

        a = quad(c1, w1, h1, t1)
        b = quad(c2, w2, h2, t2)
        got = kernels.convex_intersection_area(a, b)
        want = kernels._clip_area_py(a, b)
        # Same formulas in the same order: no transcendentals, so bitwise.
        assert got == want


def test_env_flag_selects_numpy_fallback():
    env = dict(os.environ, GSDKIT_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from gsdkit import kernels; print(kernels.backend_name())"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba():
    env = {k: v for k, v in os.environ.items() if k != "GSDKIT_NO_NUMBA"}
    out = subprocess.run(
        [sys.executable, "-c",
         "from gsdkit import kernels; print(kernels.backend_name())"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
