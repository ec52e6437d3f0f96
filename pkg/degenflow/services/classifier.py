from typing import Callable, List, Optional, Tuple
import logging

import numpy as np

from degenflow.config import settings
from degenflow.errors import NonsmoothPointError
from degenflow.models import (
    BoundaryClassification,
    BoundaryNodeRecord,
    DomainSpec,
    NodeStatus,
    Trigger,
)
from degenflow.services.coefficients import CoefficientSet
from degenflow.utils.geometry import Grid, boundary_evaluation_points, inner_normal

logger = logging.getLogger(__name__)


def _criteria(coeffs: CoefficientSet, points: np.ndarray, normals: np.ndarray, t: float, states: np.ndarray):
    """Per point: f.n, max_s |sum_i a_{x_i} n_i| and max_s a over the state sweep"""
    f_dot_n = np.sum(coeffs.f(points) * normals, axis=-1)
    gradient_dot_n = np.zeros(points.shape[0])
    a_max = np.full(points.shape[0], -np.inf)
    for s in states:
        gradient_dot_n = np.maximum(
            gradient_dot_n, np.abs(np.sum(coeffs.a_x(s, points, t) * normals, axis=-1))
        )
        a_max = np.maximum(a_max, coeffs.a(s, points, t))
    return f_dot_n, gradient_dot_n, a_max


def _triggers(f_dot_n: float, gradient_dot_n: float, a_max: float, tol: float) -> List[Trigger]:
    fired = []
    if f_dot_n < -tol:
        fired.append(Trigger.CONVECTION)
    if gradient_dot_n > tol:
        fired.append(Trigger.DIFFUSION_GRADIENT)
    if a_max > tol:
        fired.append(Trigger.DIFFUSION_POSITIVE)
    return fired


def sigma_p_membership(
    coeffs: CoefficientSet,
    point,
    t: float,
    state_samples: int = settings.STATE_SAMPLES,
    tol: float = settings.CLASSIFIER_TOL,
) -> Tuple[bool, List[Trigger]]:
    """Membership of a boundary point in the partial boundary where data is imposed"""
    p = np.asarray(point, dtype=float).reshape(1, -1)
    normal = inner_normal(coeffs.domain, p[0]).reshape(1, -1)
    f_dot_n, gradient_dot_n, a_max = _criteria(coeffs, p, normal, t, coeffs.state_samples(state_samples))
    fired = _triggers(float(f_dot_n[0]), float(gradient_dot_n[0]), float(a_max[0]), tol)
    return bool(fired), fired


def fichera_membership(
    domain: DomainSpec,
    a_lin: Callable[[np.ndarray], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    point,
    tol: float = settings.CLASSIFIER_TOL,
) -> bool:
    """Classical criterion for state-independent diffusion: a(x) > 0 or f.n < 0"""
    p = np.asarray(point, dtype=float).reshape(1, -1)
    normal = inner_normal(domain, p[0])
    a_value = float(np.asarray(a_lin(p)).reshape(-1)[0])
    f_dot_n = float(np.asarray(f(p)).reshape(-1) @ normal)
    return a_value > tol or f_dot_n < -tol


def is_state_independent(coeffs: CoefficientSet) -> bool:
    return coeffs.state.name == "constant"


def _classify_at(grid: Grid, coeffs: CoefficientSet, t: float, tol: float, states: np.ndarray):
    nodes = np.argwhere(grid.boundary)
    points = boundary_evaluation_points(grid)
    normals = np.full(points.shape, np.nan)
    for row, p in enumerate(points):
        try:
            normals[row] = inner_normal(grid.domain, p)
        except NonsmoothPointError:
            pass
    smooth = ~np.isnan(normals[:, 0])
    f_dot_n = np.full(points.shape[0], np.nan)
    gradient_dot_n = np.full(points.shape[0], np.nan)
    a_max = np.full(points.shape[0], np.nan)
    if smooth.any():
        f_dot_n[smooth], gradient_dot_n[smooth], a_max[smooth] = _criteria(
            coeffs, points[smooth], normals[smooth], t, states
        )
    return nodes, points, normals, smooth, f_dot_n, gradient_dot_n, a_max


def classify_boundary(
    grid: Grid,
    coeffs: CoefficientSet,
    t: float = 0.0,
    tol: float = settings.CLASSIFIER_TOL,
    state_samples: int = settings.STATE_SAMPLES,
    time_samples: Optional[List[float]] = None,
) -> BoundaryClassification:
    """Classify every boundary node at time t; corners/edges are unclassifiable

    When `time_samples` is given, membership is also evaluated at those times
    and the union over time is recorded alongside the instantaneous view.
    """
    states = coeffs.state_samples(state_samples)
    nodes, points, normals, smooth, f_dot_n, gradient_dot_n, a_max = _classify_at(grid, coeffs, t, tol, states)
    linear = is_state_independent(coeffs)

    records = []
    counts = {
        "boundary_nodes": int(nodes.shape[0]),
        "sigma_p": 0,
        "unclassifiable": 0,
        "fichera": 0,
        Trigger.CONVECTION.value: 0,
        Trigger.DIFFUSION_GRADIENT.value: 0,
        Trigger.DIFFUSION_POSITIVE.value: 0,
    }
    instantaneous = np.zeros(nodes.shape[0], dtype=bool)
    for row, index in enumerate(nodes):
        coordinates = grid.points[tuple(index)].tolist()
        if not smooth[row]:
            counts["unclassifiable"] += 1
            records.append(BoundaryNodeRecord(
                index=index.tolist(), coordinates=coordinates, status=NodeStatus.UNCLASSIFIABLE,
            ))
            continue
        fired = _triggers(f_dot_n[row], gradient_dot_n[row], a_max[row], tol)
        fichera = None
        if linear:
            fichera = bool(a_max[row] > tol or f_dot_n[row] < -tol)
            counts["fichera"] += int(fichera)
        for trigger in fired:
            counts[trigger.value] += 1
        counts["sigma_p"] += int(bool(fired))
        instantaneous[row] = bool(fired)
        records.append(BoundaryNodeRecord(
            index=index.tolist(),
            coordinates=coordinates,
            status=NodeStatus.CLASSIFIED,
            in_sigma_p=bool(fired),
            triggers=fired,
            fichera_member=fichera,
            normal=normals[row].tolist(),
            f_dot_n=float(f_dot_n[row]),
            max_gradient_dot_n=float(gradient_dot_n[row]),
            max_a=float(a_max[row]),
        ))

    union = instantaneous.copy()
    varied = False
    sampled = sorted(set(float(s) for s in (time_samples or [])))
    for s in sampled:
        _, _, _, _, f_s, g_s, a_s = _classify_at(grid, coeffs, s, tol, states)
        member = smooth & ((f_s < -tol) | (g_s > tol) | (a_s > tol))
        varied |= bool(np.any(member != instantaneous))
        union |= member

    classification = BoundaryClassification(
        t=float(t),
        tol=tol,
        nodes=records,
        counts=counts,
        fichera_available=linear,
        time_samples=sampled,
        varied_over_time=varied,
        union_indices=[nodes[row].tolist() for row in np.flatnonzero(union)],
    )
    logger.info(
        f"Classified {counts['boundary_nodes']} boundary nodes at t={t:g}: "
        f"{counts['sigma_p']} in Sigma_p, {counts['unclassifiable']} unclassifiable"
    )
    return classification


def held_node_mask(grid: Grid, classification: BoundaryClassification) -> np.ndarray:
    """Nodes held at zero in the partial-boundary mode: the time union plus unclassifiable nodes"""
    mask = np.zeros(grid.counts, dtype=bool)
    for index in classification.union_indices:
        mask[tuple(index)] = True
    for node in classification.nodes:
        if node.status == NodeStatus.UNCLASSIFIABLE:
            mask[tuple(node.index)] = True
    return mask
