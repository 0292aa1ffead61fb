"""One-dimensional minimization on a log grid with golden-section refinement."""
from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

GRID_POINTS = 200
GOLDEN_RTOL = 1e-8


class ScalarMin(NamedTuple):
    x: float
    fun: float
    converged: bool


def minimize_on_log_grid(fun: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                         n_grid: int = GRID_POINTS, rtol: float = GOLDEN_RTOL) -> ScalarMin:
    """Global grid search over ``[lo, hi]`` (log-spaced) then golden-section refinement.

    ``fun`` must accept an array. ``converged`` is False when the grid minimum
    is one of the two end points.
    """
    grid = np.geomspace(lo, hi, n_grid)
    values = np.asarray(fun(grid), dtype=float)
    i = int(np.nanargmin(values))
    if i == 0 or i == n_grid - 1 or not math.isfinite(values[i]):
        return ScalarMin(float(grid[i]), float(values[i]), False)
    a, b, c = grid[i - 1], grid[i], grid[i + 1]
    res = minimize_scalar(lambda x: float(fun(np.array([x]))[0]), bracket=(a, b, c),
                          method="golden", tol=rtol)
    x, f = float(res.x), float(res.fun)
    if not (a <= x <= c) or f > values[i]:
        x, f = float(b), float(values[i])
    return ScalarMin(x, f, True)
