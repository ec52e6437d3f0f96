from dataclasses import dataclass
from typing import List
import logging

import numpy as np
from scipy.integrate import cumulative_trapezoid

from degenflow.config import settings
from degenflow.errors import InvalidParameterError, NegativeDiffusionError
from degenflow.models import ConditionId, ConditionReport
from degenflow.services.coefficients import BoundCoefficients, CoefficientSet
from degenflow.utils.geometry import (
    Grid,
    boundary_evaluation_points,
    check_concavity_condition,
    distance_field,
    inradius,
)
from degenflow.utils.mollifiers import mollifier_S
from degenflow.utils.quadrature import composite_simpson

logger = logging.getLogger(__name__)


def _negativity_guard(tol: float):
    def check(values: np.ndarray) -> None:
        worst = float(np.min(values, initial=0.0))
        if worst < -tol:
            raise NegativeDiffusionError(
                f"Diffusion coefficient is negative ({worst:.6g}) at a quadrature node",
                {"value": worst},
            )
    return check


def _spatial_weight(coeffs: CoefficientSet, x, t: float) -> np.ndarray:
    return np.asarray(coeffs.space.value(np.asarray(x, dtype=float)) * coeffs.time.value(t))


def antiderivative_A(coeffs: CoefficientSet, u, x, t: float, tol: float = settings.QUADRATURE_TOL):
    """A(u,x,t): integral of a(s,x,t) over s from 0 to u by composite Simpson

    `u` may be an array shaped like x[..., 0].
    """
    weight = _spatial_weight(coeffs, x, t)

    def integrand(s):
        return coeffs.state.value(s) * weight[..., None]

    return composite_simpson(integrand, np.zeros_like(np.asarray(u, dtype=float)), u, check=_negativity_guard(tol))


def entropy_A_eta(coeffs: CoefficientSet, u, x, t: float, k: float, eta: float, tol: float = settings.QUADRATURE_TOL):
    """Integral of a(s,x,t) S_eta(s-k) over s from k to u

    The interval is split where S_eta saturates so each piece is smooth.
    """
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}", {"eta": eta})
    u = np.asarray(u, dtype=float)
    weight = _spatial_weight(coeffs, x, t)
    knee = k + np.sign(u - k) * np.minimum(eta, np.abs(u - k))

    def integrand(s):
        return coeffs.state.value(s) * weight[..., None] * mollifier_S(eta, s - k)

    guard = _negativity_guard(tol)
    lower = np.full(u.shape, float(k))
    head = composite_simpson(integrand, lower, knee, check=guard)
    tail = composite_simpson(integrand, knee, u, check=guard)
    return head + tail


@dataclass(frozen=True)
class StateIntegralTable:
    """Tabulated integral of state(s) S_eta(s-k) over [k, u] for fast field evaluation

    With a in product form, the space and time factors pull out of every
    state integral the entropy functionals need.
    """
    k: float
    eta: float
    nodes: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, coeffs: CoefficientSet, k: float, eta: float, u_min: float, u_max: float,
              resolution: int = 8193, tol: float = settings.QUADRATURE_TOL) -> "StateIntegralTable":
        if not eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {eta}", {"eta": eta})
        lo = min(u_min, k - eta)
        hi = max(u_max, k + eta)
        # k and the saturation points are nodes so the kinks of S_eta are resolved
        nodes = np.union1d(np.linspace(lo, hi, resolution), [k - eta, k, k + eta])
        state = coeffs.state.value(nodes)
        _negativity_guard(tol)(state)
        cumulative = cumulative_trapezoid(state * mollifier_S(eta, nodes - k), nodes, initial=0.0)
        values = cumulative - cumulative[np.searchsorted(nodes, k)]
        return cls(k=k, eta=eta, nodes=nodes, values=values)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.nodes, self.values)


def entropy_A_eta_field(bound: BoundCoefficients, table: StateIntegralTable, u: np.ndarray, t: float) -> np.ndarray:
    return table(u) * bound.space_value * bound.coeffs.time.value(t)


def entropy_A_eta_x_field(bound: BoundCoefficients, table: StateIntegralTable, u: np.ndarray, t: float) -> np.ndarray:
    """Integral of a_{x_i}(s,x,t) S_eta(s-k) over [k, u], per axis"""
    scale = table(u) * bound.coeffs.time.value(t)
    return scale[..., None] * bound.space_gradient


# ---------------------------------------------------------------------------
# Structural conditions
# ---------------------------------------------------------------------------

def _report(condition: ConditionId, worst: float, tol: float, count: int, notes: str = "") -> ConditionReport:
    return ConditionReport(
        condition=condition,
        passed=bool(worst <= tol),
        worst_violation=float(worst),
        tolerance=tol,
        sample_count=int(count),
        notes=notes,
    )


def _check_gradient_domination(coeffs, grid, states, times, tol) -> ConditionReport:
    points = grid.points[grid.interior]
    worst = -np.inf
    for t in times:
        for s in states:
            a = coeffs.a(s, points, t)
            grad = coeffs.a_x(s, points, t)
            a_t = coeffs.a_t(s, points, t)
            violation = coeffs.delta1 * (np.sum(grad ** 2, axis=-1) + a_t ** 2) - a
            worst = max(worst, float(violation.max(initial=-np.inf)))
    count = points.shape[0] * len(states) * len(times)
    return _report(ConditionId.C2_6, worst if count else 0.0, tol, count,
                   f"delta1={coeffs.delta1:g}")


def _check_root_holder(coeffs, grid, states, times, tol, ratio_bound) -> ConditionReport:
    h = grid.h_max
    d = distance_field(grid.domain, grid.points)
    near = grid.inside & (d < 10 * h)
    exponent = 2.0 + coeffs.delta2
    max_ratio = 0.0
    pairs = 0
    for axis in range(grid.dimension):
        n = grid.counts[axis]
        for m in range(1, min(10, n - 1) + 1):
            head = [slice(None)] * grid.dimension
            tail = [slice(None)] * grid.dimension
            head[axis] = slice(0, n - m)
            tail[axis] = slice(m, n)
            head, tail = tuple(head), tuple(tail)
            mask = grid.inside[head] & grid.inside[tail] & (near[head] | near[tail])
            if not mask.any():
                continue
            x = grid.points[head][mask]
            y = grid.points[tail][mask]
            gap = (m * grid.spacing[axis]) ** exponent
            for t in times:
                for s in states:
                    root_x = np.sqrt(np.maximum(coeffs.a(s, x, t), 0.0))
                    root_y = np.sqrt(np.maximum(coeffs.a(s, y, t), 0.0))
                    max_ratio = max(max_ratio, float(np.max(np.abs(root_x - root_y)) / gap))
            pairs += int(mask.sum())
    return _report(ConditionId.C2_8, max_ratio - ratio_bound, tol, pairs,
                   f"max ratio {max_ratio:.6g} against bound {ratio_bound:g}, exponent {exponent:g}")


def _check_boundary_flatness(coeffs, boundary_points, states, times, tol) -> ConditionReport:
    worst = 0.0
    for t in times:
        for s in states:
            worst = max(worst, float(np.abs(coeffs.a_x(s, boundary_points, t)).max(initial=0.0)))
    return _report(ConditionId.C2_9, worst, tol, boundary_points.shape[0] * len(states) * len(times))


def _check_boundary_convection(coeffs, boundary_points, tol) -> ConditionReport:
    worst = float(np.abs(coeffs.f(boundary_points)).max(initial=0.0))
    return _report(ConditionId.C2_10, worst, tol, boundary_points.shape[0])


def validate_conditions(
    coeffs: CoefficientSet,
    grid: Grid,
    T: float = 1.0,
    tol: float = settings.CLASSIFIER_TOL,
    state_samples: int = settings.STATE_SAMPLES,
    time_samples: int = 5,
    ratio_bound: float = settings.HOLDER_RATIO_BOUND,
    seed: int = 0,
) -> List[ConditionReport]:
    """One report per structural condition; failures are reported, never raised"""
    states = coeffs.state_samples(state_samples)
    times = np.linspace(0.0, T, time_samples) if T > 0 else np.array([0.0])
    boundary_points = boundary_evaluation_points(grid)

    band = min(10 * grid.h_max, 0.5 * inradius(grid.domain))
    reports = [
        _check_gradient_domination(coeffs, grid, states, times, tol),
        check_concavity_condition(grid.domain, band, samples=256, margin=grid.h_min, seed=seed),
        _check_root_holder(coeffs, grid, states, times, tol, ratio_bound),
        _check_boundary_flatness(coeffs, boundary_points, states, times, tol),
        _check_boundary_convection(coeffs, boundary_points, tol),
    ]
    for report in reports:
        logger.info(
            f"Condition {report.condition.value}: {'pass' if report.passed else 'FAIL'} "
            f"(worst {report.worst_violation:.3g}, {report.sample_count} samples)"
        )
    return reports
