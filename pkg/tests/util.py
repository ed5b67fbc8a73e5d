"""Helpers shared by solver and acceptance tests."""

import numpy as np


def interior_points(problem, k, rng):
    """k strictly interior points of the problem's box.

    Free coordinates draw from (-0.5, 0.5); fixed coordinates keep
    their pinned value; finite bounds shrink to the middle 80%.
    """
    lo = np.where(np.isfinite(problem.xl), problem.xl, -0.5)
    hi = np.where(np.isfinite(problem.xu), problem.xu, 0.5)
    width = hi - lo
    pts = []
    for _ in range(k):
        u = rng.uniform(0.1, 0.9, size=problem.n)
        x = lo + u * width
        fixed = problem.xl == problem.xu
        x[fixed] = problem.xl[fixed]
        pts.append(x)
    return pts
