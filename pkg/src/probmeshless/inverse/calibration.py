"""Empirical-Bayes choice of a kernel hyperparameter."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import CalibrationError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class CalibrationResult:
    value: float
    log_likelihood: float
    grid: np.ndarray
    surface: np.ndarray


def calibrate_empirical_bayes(log_likelihood: Callable[[float], float], grid: Sequence[float],
                              refine: bool = True) -> CalibrationResult:
    """Maximise ``log_likelihood`` over ``grid`` then refine between the best point's neighbours.

    The refinement is a bounded Brent search in log-space when the grid is
    positive (length scales), linear otherwise.  Grid points that fail
    numerically score ``-inf``; if all do, :class:`CalibrationError` is raised.
    The evaluated surface is returned for inspection.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise CalibrationError("empty calibration grid")

    def safe(v):
        try:
            out = float(log_likelihood(v))
        except NumericalError as exc:
            logger.debug("calibration point %.4g failed: %s", v, exc)
            return -np.inf
        return out if np.isfinite(out) else -np.inf

    surface = np.array([safe(v) for v in grid])
    if not np.any(np.isfinite(surface)):
        raise CalibrationError("log-likelihood failed at every grid point")
    k = int(np.argmax(surface))
    best, best_ll = grid[k], surface[k]
    if refine and grid.size > 1:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        use_log = grid[0] > 0
        to = np.log if use_log else (lambda v: v)
        back = np.exp if use_log else (lambda v: v)
        res = minimize_scalar(lambda s: -safe(float(back(s))), bounds=(to(lo), to(hi)), method="bounded",
                              options={"xatol": 1e-6})
        if np.isfinite(res.fun) and -res.fun > best_ll:
            best, best_ll = float(back(res.x)), float(-res.fun)
    return CalibrationResult(float(best), float(best_ll), grid, surface)
