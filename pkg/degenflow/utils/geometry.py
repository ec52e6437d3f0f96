from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from degenflow.config import settings
from degenflow.errors import (
    InvalidParameterError,
    InvalidResolutionError,
    NonsmoothPointError,
    OutOfDomainError,
)
from degenflow.models import ConditionId, ConditionReport, DomainKind, DomainSpec

logger = logging.getLogger(__name__)

# Points within this distance of the closed domain still count as inside
_ON_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid over the bounding box of a domain

    Every node is exactly one of interior, boundary or outside (ball only).
    `theta[i]` is the fraction of a full cell along axis i owned by each node:
    1/2 on box faces, 1 elsewhere. `weights` are the per-node cell measures
    used by every discrete integral (zero outside the domain).
    """
    domain: DomainSpec
    counts: Tuple[int, ...]
    spacing: np.ndarray
    axes: Tuple[np.ndarray, ...]
    points: np.ndarray
    inside: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    theta: Tuple[np.ndarray, ...]
    weights: np.ndarray

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.counts

    @property
    def h_min(self) -> float:
        return float(self.spacing.min())

    @property
    def h_max(self) -> float:
        return float(self.spacing.max())

    @property
    def outside(self) -> np.ndarray:
        return ~self.inside

    def boundary_indices(self) -> List[Tuple[int, ...]]:
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.boundary)]

    def interior_indices(self) -> List[Tuple[int, ...]]:
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.interior)]

    def same_as(self, other: "Grid") -> bool:
        return (
            self.domain == other.domain
            and self.counts == other.counts
            and np.array_equal(self.spacing, other.spacing)
        )


def build_grid(domain: DomainSpec, counts: Sequence[int]) -> Grid:
    """Build the uniform grid and classify its nodes"""
    counts = tuple(int(c) for c in counts)
    if len(counts) != domain.dimension:
        raise InvalidResolutionError(
            f"Expected {domain.dimension} node counts, got {len(counts)}",
            {"counts": list(counts)},
        )
    if any(c < 3 for c in counts):
        raise InvalidResolutionError(
            f"Every axis needs at least 3 nodes, got {list(counts)}",
            {"counts": list(counts)},
        )

    bounds = domain.axis_bounds()
    axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, counts))
    spacing = np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(bounds, counts)])
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack(mesh, axis=-1)

    if domain.kind == DomainKind.UNIT_BALL:
        radius = np.linalg.norm(points, axis=-1)
        inside = radius <= 1.0 + _ON_DOMAIN_TOL
        boundary = np.zeros(counts, dtype=bool)
        for axis in range(domain.dimension):
            for shift in (-1, 1):
                neighbour = np.roll(inside, -shift, axis=axis)
                # roll wraps around; the wrapped slab is off-grid
                edge = [slice(None)] * domain.dimension
                edge[axis] = -1 if shift == 1 else 0
                neighbour[tuple(edge)] = False
                boundary |= inside & ~neighbour
        theta = tuple(np.ones(counts) for _ in range(domain.dimension))
    else:
        inside = np.ones(counts, dtype=bool)
        boundary = np.zeros(counts, dtype=bool)
        theta_list = []
        for axis in range(domain.dimension):
            index = np.arange(counts[axis])
            on_face = (index == 0) | (index == counts[axis] - 1)
            reshape = [1] * domain.dimension
            reshape[axis] = counts[axis]
            on_face = np.broadcast_to(on_face.reshape(reshape), counts)
            boundary |= on_face
            theta_list.append(np.where(on_face, 0.5, 1.0))
        theta = tuple(theta_list)

    interior = inside & ~boundary
    weights = np.prod(spacing) * np.prod(np.stack(theta), axis=0) * inside

    grid = Grid(
        domain=domain,
        counts=counts,
        spacing=spacing,
        axes=axes,
        points=points,
        inside=inside,
        boundary=boundary,
        interior=interior,
        theta=theta,
        weights=weights,
    )
    logger.debug(
        f"Built {domain.kind.value} grid {counts}: "
        f"{int(interior.sum())} interior, {int(boundary.sum())} boundary nodes"
    )
    return grid


def inradius(domain: DomainSpec) -> float:
    if domain.kind == DomainKind.UNIT_BALL:
        return 1.0
    return min((hi - lo) / 2.0 for lo, hi in domain.axis_bounds())


def _face_distances(domain: DomainSpec, point: np.ndarray) -> np.ndarray:
    """Distances to the 2N faces of a box, ordered (lo_0, hi_0, lo_1, ...)"""
    bounds = np.asarray(domain.axis_bounds())
    return np.stack([point - bounds[:, 0], bounds[:, 1] - point], axis=-1).reshape(
        point.shape[:-1] + (2 * domain.dimension,)
    )


def _as_point(domain: DomainSpec, point) -> np.ndarray:
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.shape[0] != domain.dimension:
        raise InvalidParameterError(
            f"Point has {p.shape[0]} coordinates, domain dimension is {domain.dimension}"
        )
    return p


def distance_field(domain: DomainSpec, points: np.ndarray) -> np.ndarray:
    """Signed distance to the boundary: positive inside, negative outside"""
    points = np.asarray(points, dtype=float)
    if domain.kind == DomainKind.UNIT_BALL:
        return 1.0 - np.linalg.norm(points, axis=-1)
    return _face_distances(domain, points).min(axis=-1)


def distance_gradient(domain: DomainSpec, points: np.ndarray) -> np.ndarray:
    """Gradient of the distance function; on box ridges the first nearest face wins"""
    points = np.asarray(points, dtype=float)
    if domain.kind == DomainKind.UNIT_BALL:
        radius = np.linalg.norm(points, axis=-1, keepdims=True)
        safe = np.where(radius > 0, radius, 1.0)
        return np.where(radius > 0, -points / safe, 0.0)
    nearest = _face_distances(domain, points).argmin(axis=-1)
    axis = nearest // 2
    sign = np.where(nearest % 2 == 0, 1.0, -1.0)
    return np.eye(domain.dimension)[axis] * sign[..., None]


def laplacian_field(domain: DomainSpec, points: np.ndarray) -> np.ndarray:
    """Analytic Laplacian of d away from its singular set (0 at the ball centre)"""
    points = np.asarray(points, dtype=float)
    if domain.kind == DomainKind.UNIT_BALL and domain.dimension > 1:
        radius = np.linalg.norm(points, axis=-1)
        safe = np.where(radius > 0, radius, 1.0)
        return np.where(radius > 0, -(domain.dimension - 1) / safe, 0.0)
    return np.zeros(points.shape[:-1])


def distance_to_boundary(domain: DomainSpec, point) -> float:
    p = _as_point(domain, point)
    d = float(distance_field(domain, p[None, :])[0])
    if d < -_ON_DOMAIN_TOL:
        raise OutOfDomainError(
            f"Point {p.tolist()} lies outside the closed domain",
            {"point": p.tolist()},
        )
    return max(d, 0.0)


def laplacian_of_distance(domain: DomainSpec, point) -> float:
    p = _as_point(domain, point)
    distance_to_boundary(domain, p)

    if domain.kind == DomainKind.UNIT_BALL:
        if domain.dimension == 1:
            return 0.0
        r = float(np.linalg.norm(p))
        if r == 0.0:
            raise NonsmoothPointError("Distance function is not smooth at the ball centre")
        return -(domain.dimension - 1) / r

    faces = _face_distances(domain, p[None, :])[0]
    nearest = faces.min()
    if np.count_nonzero(np.abs(faces - nearest) <= _ON_DOMAIN_TOL) > 1:
        raise NonsmoothPointError(
            f"Point {p.tolist()} is equidistant from several faces",
            {"point": p.tolist()},
        )
    return 0.0


def inner_normal(domain: DomainSpec, boundary_point, tol: float = _ON_DOMAIN_TOL) -> np.ndarray:
    """Unit inner normal at a boundary point (ball points may sit `tol` off the sphere)"""
    p = _as_point(domain, boundary_point)

    if domain.kind == DomainKind.UNIT_BALL:
        r = float(np.linalg.norm(p))
        if abs(1.0 - r) > tol:
            raise OutOfDomainError(
                f"Point {p.tolist()} is not on the unit sphere (|x|={r:.6g})",
                {"point": p.tolist()},
            )
        return -p / r

    faces = _face_distances(domain, p[None, :])[0]
    if faces.min() < -tol:
        raise OutOfDomainError(f"Point {p.tolist()} lies outside the box", {"point": p.tolist()})
    touching = np.flatnonzero(np.abs(faces) <= tol)
    if touching.size == 0:
        raise OutOfDomainError(f"Point {p.tolist()} is not on the boundary", {"point": p.tolist()})
    if touching.size > 1:
        raise NonsmoothPointError(
            f"Normal is not unique at corner/edge point {p.tolist()}",
            {"point": p.tolist()},
        )
    face = int(touching[0])
    normal = np.zeros(domain.dimension)
    normal[face // 2] = 1.0 if face % 2 == 0 else -1.0
    return normal


def project_to_boundary(domain: DomainSpec, point) -> np.ndarray:
    """Nearest point of the boundary"""
    p = _as_point(domain, point)
    if domain.kind == DomainKind.UNIT_BALL:
        r = float(np.linalg.norm(p))
        if r == 0.0:
            raise NonsmoothPointError("The ball centre has no unique nearest boundary point")
        return p / r
    bounds = np.asarray(domain.axis_bounds())
    faces = _face_distances(domain, p[None, :])[0]
    face = int(faces.argmin())
    projected = p.copy()
    projected[face // 2] = bounds[face // 2, face % 2]
    return projected


def _sample_band(domain: DomainSpec, band_width: float, samples: int, rng) -> np.ndarray:
    n = domain.dimension
    depth = rng.uniform(0.0, band_width, size=samples)
    depth = np.where(depth == 0.0, band_width / 2, depth)
    if domain.kind == DomainKind.UNIT_BALL:
        direction = rng.standard_normal((samples, n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * (1.0 - depth)[:, None]

    bounds = np.asarray(domain.axis_bounds())
    points = rng.uniform(bounds[:, 0], bounds[:, 1], size=(samples, n))
    axis = rng.integers(0, n, size=samples)
    side = rng.integers(0, 2, size=samples)
    rows = np.arange(samples)
    points[rows, axis] = np.where(
        side == 0, bounds[axis, 0] + depth, bounds[axis, 1] - depth
    )
    return points


def check_concavity_condition(
    domain: DomainSpec,
    band_width: float,
    samples: int,
    tol: float = settings.CONCAVITY_TOL,
    margin: Optional[float] = None,
    seed: int = 0,
) -> ConditionReport:
    """Sample Laplacian(d) <= 0 in the band 0 < d < band_width

    Box samples closer than `margin` to a face-equidistant ridge are excluded
    and counted in the notes. The default margin is one cell of a grid whose
    band spans 10 cells, i.e. band_width / 10.
    """
    if band_width <= 0:
        raise InvalidParameterError(f"Band width must be positive, got {band_width}")
    if band_width >= inradius(domain):
        raise InvalidParameterError(
            f"Band width {band_width} must be smaller than the inradius {inradius(domain)}"
        )
    if samples < 1:
        raise InvalidParameterError(f"Need at least one sample, got {samples}")

    if margin is None:
        margin = band_width / 10

    rng = np.random.default_rng(seed)
    points = _sample_band(domain, band_width, samples, rng)

    worst = -np.inf
    evaluated = 0
    skipped = 0
    for p in points:
        if domain.kind != DomainKind.UNIT_BALL and margin > 0:
            faces = np.sort(_face_distances(domain, p[None, :])[0])
            if faces[1] - faces[0] < margin:
                skipped += 1
                continue
        try:
            value = laplacian_of_distance(domain, p)
        except NonsmoothPointError:
            skipped += 1
            continue
        worst = max(worst, value)
        evaluated += 1

    worst_violation = float(worst) if evaluated else 0.0
    return ConditionReport(
        condition=ConditionId.C2_7,
        passed=worst_violation <= tol,
        worst_violation=worst_violation,
        tolerance=tol,
        sample_count=evaluated,
        notes=f"band width {band_width:g}, ridge margin {margin:g}; {skipped} nonsmooth samples skipped",
    )


def boundary_evaluation_points(grid: Grid) -> np.ndarray:
    """Boundary nodes as (M, N) coordinates; ball nodes are pulled onto the sphere"""
    points = grid.points[grid.boundary]
    if grid.domain.kind == DomainKind.UNIT_BALL:
        radius = np.linalg.norm(points, axis=-1, keepdims=True)
        points = points / np.where(radius > 0, radius, 1.0)
    return points
