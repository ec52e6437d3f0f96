from typing import Callable, Optional
import logging

import numpy as np

from degenflow.config import settings

logger = logging.getLogger(__name__)


def _simpson(func: Callable[[np.ndarray], np.ndarray], lower: np.ndarray, upper: np.ndarray, n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    width = upper - lower
    nodes = lower[..., None] + width[..., None] * t
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return width / (3.0 * n) * np.sum(func(nodes) * weights, axis=-1)


def composite_simpson(
    func: Callable[[np.ndarray], np.ndarray],
    lower,
    upper,
    min_intervals: int = settings.QUADRATURE_MIN_INTERVALS,
    tol: float = settings.QUADRATURE_TOL,
    max_doublings: int = settings.QUADRATURE_MAX_DOUBLINGS,
    check: Optional[Callable[[np.ndarray], None]] = None,
):
    """Signed integral of `func` from `lower` to `upper`, elementwise

    `func` receives an array shaped lower.shape + (n+1,) of abscissae. The
    interval count doubles from `min_intervals` until successive estimates
    differ by less than `tol` everywhere. `check`, when given, sees every
    batch of abscissa values (used to reject negative diffusion).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    lower, upper = np.broadcast_arrays(lower, upper)
    n = max(2, min_intervals + (min_intervals % 2))

    def integrand(nodes):
        values = func(nodes)
        if check is not None:
            check(values)
        return values

    previous = current = _simpson(integrand, lower, upper, n)
    for _ in range(max_doublings):
        n *= 2
        current = _simpson(integrand, lower, upper, n)
        if np.all(np.abs(current - previous) < tol):
            return current if current.ndim else float(current)
        previous = current
    logger.debug(f"Simpson doubling stopped at {n} intervals without reaching tol={tol:g}")
    return current if current.ndim else float(current)


def trapezoid_time(values: np.ndarray, times: np.ndarray) -> float:
    """Trapezoid rule along the leading (time) axis of a series"""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return 0.0
    dt = np.diff(times)
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * dt))
