import numpy as np
import pytest

from rdoptctl import (FeField, GridImage, ModelParams, Problem, TimeGrid,
                      build_interval_mesh)

BENCH_RHO, BENCH_D, BENCH_T, BENCH_STEPS = 0.5, 0.1, 10.0, 1000
C0 = 2.512566e-2


def logistic(t, u0, rho, c):
    r = rho - c
    return r * u0 / (rho * u0 + (r - rho * u0) * np.exp(-r * t))


def smooth_directions(grid, n, seed=0, modes=5):
    """Random cosine series in time, normalized to unit discrete L²(0, T) norm."""
    rng = np.random.default_rng(seed)
    t = grid.times / grid.T
    basis = np.array([np.cos(np.pi * j * t) for j in range(modes)])
    out = []
    for _ in range(n):
        eta = rng.standard_normal(modes) @ basis
        out.append(eta / grid.l2_norm(eta))
    return out


def blob_image(n, radius_frac=0.44):
    y, x = np.mgrid[0:n, 0:n]
    c = (n - 1) / 2
    r = np.hypot(x - c, y - c)
    return GridImage(np.maximum(0.0, 1.0 - (r / (radius_frac * n)) ** 2))


@pytest.fixture(scope="session")
def bench_problem():
    mesh = build_interval_mesh(160, 0.0, 1.0)
    u0 = FeField.interpolate(mesh, lambda x: (np.cos(np.pi * x) + 1) / 2)
    return Problem(mesh, ModelParams(BENCH_RHO, BENCH_D), TimeGrid(BENCH_T, BENCH_STEPS), u0)
