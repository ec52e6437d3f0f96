from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from degenflow.config import settings
from degenflow.errors import (
    IncompatibleTrajectoriesError,
    InvalidParameterError,
    InvalidTestFunctionError,
)
from degenflow.models import (
    ComparisonEntry,
    ComparisonReport,
    DomainKind,
    EntropyEntry,
    EntropyReport,
    JumpFlag,
    StabilityReport,
    VerificationSettings,
)
from degenflow.services.coefficients import BoundCoefficients, CoefficientSet
from degenflow.services.problem import StateIntegralTable, entropy_A_eta_field, entropy_A_eta_x_field
from degenflow.services.solver import Field, Trajectory, l1_distance
from degenflow.utils.geometry import Grid, distance_field, distance_gradient, inradius
from degenflow.utils.mollifiers import mollifier_h, mollifier_I, mollifier_S, moment_integral, sign
from degenflow.utils.quadrature import trapezoid_time

logger = logging.getLogger(__name__)

# Terms of the comparison functional that live in the boundary band d < lambda
BOUNDARY_TERMS = ("a_x_u", "a_x_v", "convection_flux", "diffusion_band")


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

def _check_lambda(grid: Grid, lam: float) -> None:
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam}", {"lambda": lam})
    radius = inradius(grid.domain)
    if lam >= radius:
        raise InvalidParameterError(
            f"lambda={lam:g} must be smaller than the inradius {radius:g}",
            {"lambda": lam, "inradius": radius},
        )


def _profile(kind: str, d: np.ndarray, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Spatial profile p(d) and p'(d)

    boundary: 1 - (d-lam)^2/lam^2 below lam, 1 above (vanishes on the boundary).
    interior: the same ramp shifted by lam, 0 for d <= lam (compact support).
    """
    if kind == "interior":
        d = d - lam
        ramp = (d > 0) & (d < lam)
        value = np.where(d <= 0, 0.0, np.where(ramp, 1.0 - (d - lam) ** 2 / lam ** 2, 1.0))
        slope = np.where(ramp, -2.0 * (d - lam) / lam ** 2, 0.0)
        return value, slope
    ramp = d < lam
    value = np.where(ramp, 1.0 - (d - lam) ** 2 / lam ** 2, 1.0)
    slope = np.where(ramp, -2.0 * (d - lam) / lam ** 2, 0.0)
    return value, slope


@dataclass(frozen=True)
class SpatialWeight:
    """Nodal values, gradient and cell-averaged Laplacian of a spatial profile"""
    values: np.ndarray
    gradient: np.ndarray
    laplacian: np.ndarray


def _spatial_weight(grid: Grid, lam: float, kind: str) -> SpatialWeight:
    domain = grid.domain
    d = distance_field(domain, grid.points)
    value, slope = _profile(kind, d, lam)
    gradient = slope[..., None] * distance_gradient(domain, grid.points)

    # Laplacian as the flux of the analytic gradient through each node's cell
    laplacian = np.zeros(grid.counts)
    for axis in range(grid.dimension):
        h = grid.spacing[axis]
        upper = grid.points.copy()
        lower = grid.points.copy()
        upper[..., axis] += 0.5 * h
        lower[..., axis] -= 0.5 * h
        if domain.kind != DomainKind.UNIT_BALL:
            index = np.arange(grid.counts[axis]).reshape(
                [-1 if i == axis else 1 for i in range(grid.dimension)]
            )
            at_lo = np.broadcast_to(index == 0, grid.counts)
            at_hi = np.broadcast_to(index == grid.counts[axis] - 1, grid.counts)
            lower[at_lo] = grid.points[at_lo]
            upper[at_hi] = grid.points[at_hi]
        flux = []
        for y in (upper, lower):
            _, s = _profile(kind, distance_field(domain, y), lam)
            flux.append(s * distance_gradient(domain, y)[..., axis])
        width = upper[..., axis] - lower[..., axis]
        laplacian += (flux[0] - flux[1]) / width
    outside = ~grid.inside
    value = np.where(outside, 0.0, value)
    gradient[outside] = 0.0
    laplacian[outside] = 0.0
    return SpatialWeight(values=value, gradient=gradient, laplacian=laplacian)


@dataclass(frozen=True)
class SpaceTimeBump:
    """phi(x,t) = amplitude * b(t) * p(d(x)) with b = sin^2 on the time window

    `profile` is "boundary" for the weight that vanishes on the boundary and
    "interior" for the compactly supported variant used by entropy residuals.
    """
    lam: float
    window: Tuple[float, float]
    profile: str = "interior"
    amplitude: float = 1.0

    def __post_init__(self):
        t0, t1 = self.window
        if not t1 > t0:
            raise InvalidParameterError(f"Time window must satisfy start < end, got {self.window}")
        if self.profile not in ("boundary", "interior"):
            raise InvalidParameterError(f"Unknown test-function profile {self.profile!r}")

    def time_factor(self, t: float) -> Tuple[float, float]:
        """b(t) and b'(t)"""
        t0, t1 = self.window
        if t < t0 or t > t1:
            return 0.0, 0.0
        length = t1 - t0
        phase = math.pi * (t - t0) / length
        return self.amplitude * math.sin(phase) ** 2, self.amplitude * (math.pi / length) * math.sin(2.0 * phase)

    def spatial(self, grid: Grid) -> SpatialWeight:
        _check_lambda(grid, self.lam)
        weight = _spatial_weight(grid, self.lam, self.profile)
        if self.amplitude < 0 and np.any(weight.values[grid.inside] > 0):
            raise InvalidTestFunctionError(
                f"Test function is negative (amplitude {self.amplitude:g})",
                {"amplitude": self.amplitude},
            )
        return weight

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)


def boundary_test_function(grid: Grid, lam: float) -> Field:
    """Nodal values of the boundary weight: 0 on the boundary, 1 for d >= lam"""
    _check_lambda(grid, lam)
    d = distance_field(grid.domain, grid.points)
    value, _ = _profile("boundary", d, lam)
    return Field(grid, np.where(grid.inside, np.clip(value, 0.0, 1.0), 0.0))


def residual_tolerance(grid: Grid, dt: float, lam: float, phi_sup: float = 1.0,
                       constant: float = settings.RESIDUAL_TOL_CONSTANT) -> float:
    return constant * (grid.h_max + dt + grid.h_max / lam) * phi_sup


# ---------------------------------------------------------------------------
# Entropy residuals
# ---------------------------------------------------------------------------

def _check_eta(eta: float) -> None:
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}", {"eta": eta})


def _gradient_squared(u: np.ndarray, grid: Grid) -> np.ndarray:
    total = np.zeros_like(u)
    for axis in range(grid.dimension):
        total += np.gradient(u, grid.spacing[axis], axis=axis) ** 2
    return total


def _u_bounds(traj: Trajectory) -> Tuple[float, float]:
    inside = traj.values[:, traj.grid.inside]
    return float(inside.min()), float(inside.max())


def entropy_residual_terms(
    traj: Trajectory,
    coeffs: CoefficientSet,
    k: float,
    phi: SpaceTimeBump,
    eta: Optional[float] = None,
) -> Dict[str, float]:
    """Time-integrated terms of the classical (eta=None) or regularized entropy residual

    Classical: |u-k| phi_t + |A(u)-A(k)| lap phi + sign(u-k)(A_x(u)-A_x(k)).grad phi
    - |u-k| f.grad phi - div f |u-k| phi + sign(u-k)(g - c u) phi.
    Regularized: the same with I_eta, A_eta and S_eta in place of |.|, |A| and
    sign, plus the dissipation -h_eta(u-k) a |grad u|^2 phi. With eps > 0 the
    viscous terms of the approximating problem are included.
    """
    if eta is not None:
        _check_eta(eta)
    grid = traj.grid
    weight = phi.spatial(grid)
    bound: BoundCoefficients = coeffs.bind(grid.points)
    eps = traj.config.epsilon
    table = None
    if eta is not None:
        u_min, u_max = _u_bounds(traj)
        table = StateIntegralTable.build(coeffs, k, eta, min(u_min, k), max(u_max, k))

    names = ["time", "diffusion", "a_x", "convection", "divergence", "source", "viscous"]
    if eta is not None:
        names.append("dissipation")
    series = {name: np.zeros(len(traj.fields)) for name in names}
    f_dot_grad = np.sum(bound.f * weight.gradient, axis=-1)

    for n, snapshot in enumerate(traj.fields):
        b, b_t = phi.time_factor(snapshot.t)
        if b == 0.0 and b_t == 0.0:
            continue
        t = snapshot.t
        u = snapshot.values
        diff = u - k
        phi_x = b * weight.values
        lap = b * weight.laplacian
        grad_dot = b * f_dot_grad
        source = bound.g(t) - bound.c(t) * u

        if eta is None:
            magnitude = np.abs(diff)
            sgn = sign(diff)
            k_field = np.full_like(u, k)
            band = np.abs(bound.A(u, t) - bound.A(k_field, t))
            flux = sgn[..., None] * (bound.A_x(u, t) - bound.A_x(k_field, t))
            integrands = {
                "time": magnitude * b_t * weight.values,
                "diffusion": band * lap,
                "a_x": b * np.sum(flux * weight.gradient, axis=-1),
                "convection": -magnitude * grad_dot,
                "divergence": -bound.div_f * magnitude * phi_x,
                "source": sgn * source * phi_x,
                "viscous": eps * magnitude * lap,
            }
        else:
            smooth_abs = mollifier_I(eta, diff)
            smooth_sign = mollifier_S(eta, diff)
            flux = entropy_A_eta_x_field(bound, table, u, t)
            a_u = bound.a(u, t)
            integrands = {
                "time": smooth_abs * b_t * weight.values,
                "diffusion": entropy_A_eta_field(bound, table, u, t) * lap,
                "a_x": b * np.sum(flux * weight.gradient, axis=-1),
                "convection": -smooth_abs * grad_dot,
                "divergence": bound.div_f * (moment_integral(eta, diff) - diff * smooth_sign) * phi_x,
                "source": smooth_sign * source * phi_x,
                "viscous": eps * smooth_abs * lap,
                "dissipation": -mollifier_h(eta, diff) * (a_u + eps) * _gradient_squared(u, grid) * phi_x,
            }
        for name, integrand in integrands.items():
            series[name][n] = float(np.sum(integrand * grid.weights))

    times = traj.times
    return {name: trapezoid_time(values, times) for name, values in series.items()}


def classical_entropy_residual(traj: Trajectory, coeffs: CoefficientSet, k: float, phi: SpaceTimeBump) -> float:
    return float(sum(entropy_residual_terms(traj, coeffs, k, phi).values()))


def regularized_entropy_residual(traj: Trajectory, coeffs: CoefficientSet, k: float, eta: float,
                                 phi: SpaceTimeBump) -> float:
    _check_eta(eta)
    return float(sum(entropy_residual_terms(traj, coeffs, k, phi, eta=eta).values()))


def default_entropy_lambda(grid: Grid) -> float:
    return min(0.1, 0.25 * inradius(grid.domain))


def _resolve_window(traj: Trajectory, window: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    T = float(traj.times[-1])
    if window is None:
        if T <= 0:
            raise InvalidParameterError("Residuals need a trajectory with T > 0")
        return 0.0, T
    t0, t1 = float(window[0]), float(window[1])
    if t0 < 0 or t1 > T + 1e-12 or not t1 > t0:
        raise InvalidParameterError(f"Time window {window} must lie inside [0, {T:g}]", {"window": [t0, t1]})
    return t0, t1


def entropy_report(
    traj: Trajectory,
    coeffs: Optional[CoefficientSet] = None,
    verification: Optional[VerificationSettings] = None,
) -> EntropyReport:
    """Classical and regularized residuals over the k sweep, eta list and lambda list

    The verdict is min classical residual >= -tol, with tol taken at the
    smallest lambda (the loosest bound in the sweep).
    """
    coeffs = coeffs or traj.coeffs
    verification = verification or VerificationSettings()
    grid = traj.grid
    window = _resolve_window(traj, verification.time_window)

    u_min, u_max = _u_bounds(traj)
    spread = 0.25 * (u_max - u_min) if u_max > u_min else 0.25
    sentinels = (u_min - spread, u_max + spread)
    if verification.k_values:
        k_values = [float(k) for k in verification.k_values]
    else:
        k_values = np.linspace(sentinels[0], sentinels[1], verification.k_sweep_count).tolist()
    lambdas = [float(lam) for lam in (verification.lambda_values or [default_entropy_lambda(grid)])]
    etas = [float(e) for e in verification.eta_values]
    bumps = {lam: SpaceTimeBump(lam=lam, window=window) for lam in lambdas}

    entries: List[EntropyEntry] = []
    classical: Dict[Tuple[float, float], float] = {}
    for lam in lambdas:
        for k in k_values:
            residual = classical_entropy_residual(traj, coeffs, k, bumps[lam])
            classical[(k, lam)] = residual
            entries.append(EntropyEntry(k=k, lam=lam, residual=residual))

    errors = []
    for eta in etas:
        worst = 0.0
        for lam in lambdas:
            for k in k_values:
                terms = entropy_residual_terms(traj, coeffs, k, bumps[lam], eta=eta)
                residual = float(sum(terms.values()))
                dissipation = terms["dissipation"]
                entries.append(EntropyEntry(k=k, eta=eta, lam=lam, residual=residual, dissipation=dissipation))
                worst = max(worst, abs(residual - dissipation - classical[(k, lam)]))
        errors.append(worst)
    ordered = [e for _, e in sorted(zip(etas, errors), key=lambda pair: -pair[0])]
    monotone = all(b <= a * (1.0 + 1e-9) + 1e-14 for a, b in zip(ordered, ordered[1:])) if ordered else None

    first = bumps[lambdas[0]]
    gap = (classical_entropy_residual(traj, coeffs, sentinels[0], first)
           + classical_entropy_residual(traj, coeffs, sentinels[1], first))

    tolerance = residual_tolerance(grid, traj.dt, min(lambdas), first.sup_norm, verification.tolerance_constant)
    min_residual = min(classical.values())
    passed = bool(min_residual >= -tolerance)
    logger.info(
        f"Entropy check over {len(k_values)} k, {len(etas)} eta, {len(lambdas)} lambda: "
        f"min residual {min_residual:.4g}, tol {tolerance:.4g} -> {'pass' if passed else 'FAIL'}"
    )
    return EntropyReport(
        k_values=k_values,
        eta_values=etas,
        lambda_values=lambdas,
        entries=entries,
        min_residual=min_residual,
        tolerance=tolerance,
        passed=passed,
        sign_collapse_gap=gap,
        eta_convergence=errors,
        eta_convergence_monotone=monotone,
        provenance={
            "counts": list(grid.counts),
            "h": grid.h_max,
            "dt": traj.dt,
            "snapshots": len(traj.fields),
            "window": list(window),
            "epsilon": traj.config.epsilon,
            "test_function": "interior",
        },
    )


# ---------------------------------------------------------------------------
# Stability and comparison
# ---------------------------------------------------------------------------

def _check_pair(traj_u: Trajectory, traj_v: Trajectory) -> None:
    if not traj_u.grid.same_as(traj_v.grid):
        raise IncompatibleTrajectoriesError(
            "Trajectories live on different grids",
            {"counts_u": list(traj_u.grid.counts), "counts_v": list(traj_v.grid.counts)},
        )
    times_u, times_v = traj_u.times, traj_v.times
    if times_u.shape != times_v.shape or not np.allclose(times_u, times_v, rtol=0.0, atol=1e-12):
        raise IncompatibleTrajectoriesError(
            "Trajectories have different snapshot times",
            {"snapshots_u": int(times_u.size), "snapshots_v": int(times_v.size)},
        )


def l1_contraction_report(traj_u: Trajectory, traj_v: Trajectory, c_declared: float = 0.0) -> StabilityReport:
    """L1 distance series with the Gronwall-form check over every snapshot pair s < tau

    D(tau) <= D(s) + c * int_s^tau D, the time integral by trapezoid.
    """
    _check_pair(traj_u, traj_v)
    times = traj_u.times
    distances = np.array([l1_distance(a, b) for a, b in zip(traj_u.fields, traj_v.fields)])
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (distances[1:] + distances[:-1]) * np.diff(times))])

    # violation[i, j] for s = t_i, tau = t_j
    violation = (distances[None, :] - distances[:, None]
                 - c_declared * (cumulative[None, :] - cumulative[:, None]))
    later = np.triu(np.ones((times.size, times.size), dtype=bool), k=1)
    worst = float(violation[later].max()) if later.any() else 0.0
    slack = 1e-10 * (1.0 + float(distances.max(initial=0.0)))

    positive = distances > 0
    c_fit = None
    if np.count_nonzero(positive) >= 2 and np.ptp(times[positive]) > 0:
        c_fit = float(np.polyfit(times[positive], np.log(distances[positive]), 1)[0])
    ratio = float(distances[-1] / distances[0]) if distances[0] > 0 else None
    nonincreasing = bool(np.all(np.diff(distances) <= 1e-10))
    holds = worst <= slack

    logger.info(
        f"L1 stability: D(0)={distances[0]:.6g}, D(T)={distances[-1]:.6g}, "
        f"C_fit={c_fit}, Gronwall with c={c_declared:g}: {'holds' if holds else 'VIOLATED'}"
    )
    return StabilityReport(
        times=times.tolist(),
        l1_distances=distances.tolist(),
        initial_distance=float(distances[0]),
        final_distance=float(distances[-1]),
        ratio=ratio,
        c_declared=float(c_declared),
        c_fit=c_fit,
        gronwall_holds=holds,
        worst_gronwall_violation=worst,
        nonincreasing=nonincreasing,
        passed=holds,
    )


def comparison_terms(
    traj_u: Trajectory,
    traj_v: Trajectory,
    coeffs: CoefficientSet,
    lam: float,
    window: Optional[Tuple[float, float]] = None,
) -> Dict[str, float]:
    """Time-integrated terms of the two-solution comparison functional with phi = b(t) phi_lambda(x)

    `inflow_flux` repeats the convection flux restricted to f.grad d < 0 and is
    not part of the total.
    """
    _check_pair(traj_u, traj_v)
    grid = traj_u.grid
    _check_lambda(grid, lam)
    phi = SpaceTimeBump(lam=lam, window=_resolve_window(traj_u, window), profile="boundary")
    weight = phi.spatial(grid)
    bound = coeffs.bind(grid.points)
    f_dot_grad = np.sum(bound.f * weight.gradient, axis=-1)
    inflow = np.sum(bound.f * distance_gradient(grid.domain, grid.points), axis=-1) < 0

    names = ("time", "diffusion_band", "a_x_u", "a_x_v", "convection_flux", "divergence", "reaction", "inflow_flux")
    series = {name: np.zeros(len(traj_u.fields)) for name in names}
    for n, (fu, fv) in enumerate(zip(traj_u.fields, traj_v.fields)):
        b, b_t = phi.time_factor(fu.t)
        if b == 0.0 and b_t == 0.0:
            continue
        t = fu.t
        u, v = fu.values, fv.values
        gap = np.abs(u - v)
        sgn = sign(u - v)
        phi_x = b * weight.values
        a_x_uv = sgn[..., None] * (bound.A_x(u, t) - bound.A_x(v, t))
        a_x_vu = sign(v - u)[..., None] * (bound.A_x(v, t) - bound.A_x(u, t))
        convection = -b * f_dot_grad * gap
        integrands = {
            "time": gap * b_t * weight.values,
            "diffusion_band": sgn * (bound.A(u, t) - bound.A(v, t)) * b * weight.laplacian,
            "a_x_u": b * np.sum(a_x_uv * weight.gradient, axis=-1),
            "a_x_v": b * np.sum(a_x_vu * weight.gradient, axis=-1),
            "convection_flux": convection,
            "divergence": -bound.div_f * phi_x * gap,
            "reaction": -bound.c(t) * phi_x * gap,
            "inflow_flux": np.where(inflow, convection, 0.0),
        }
        for name, integrand in integrands.items():
            series[name][n] = float(np.sum(integrand * grid.weights))

    times = traj_u.times
    return {name: trapezoid_time(values, times) for name, values in series.items()}


def comparison_functional(
    traj_u: Trajectory,
    traj_v: Trajectory,
    coeffs: CoefficientSet,
    lam: float,
    window: Optional[Tuple[float, float]] = None,
) -> float:
    terms = comparison_terms(traj_u, traj_v, coeffs, lam, window)
    return float(sum(value for name, value in terms.items() if name != "inflow_flux"))


def default_comparison_lambdas(grid: Grid) -> List[float]:
    radius = inradius(grid.domain)
    return [lam for lam in (8 * grid.h_max, 4 * grid.h_max, 2 * grid.h_max) if lam < radius]


def comparison_report(
    traj_u: Trajectory,
    traj_v: Trajectory,
    coeffs: CoefficientSet,
    lambdas: Optional[Sequence[float]] = None,
    window: Optional[Tuple[float, float]] = None,
) -> ComparisonReport:
    """Comparison functional per lambda and whether each boundary term shrinks with lambda"""
    lambdas = sorted((float(lam) for lam in (lambdas or default_comparison_lambdas(traj_u.grid))), reverse=True)
    entries = []
    for lam in lambdas:
        terms = comparison_terms(traj_u, traj_v, coeffs, lam, window)
        total = float(sum(value for name, value in terms.items() if name != "inflow_flux"))
        entries.append(ComparisonEntry(lam=lam, total=total, terms=terms))

    decay = {}
    for name in BOUNDARY_TERMS:
        magnitudes = [abs(entry.terms[name]) for entry in entries]
        decay[name] = all(b < a or a == b == 0.0 for a, b in zip(magnitudes, magnitudes[1:]))
    logger.info(f"Comparison functional over lambda={lambdas}: boundary decay {decay}")
    return ComparisonReport(entries=entries, boundary_decay=decay)


# ---------------------------------------------------------------------------
# Jump diagnostic
# ---------------------------------------------------------------------------

def jump_degeneracy_scan(field_: Field, coeffs: CoefficientSet, gradient_threshold: float = 0.5,
                         state_samples: int = 33) -> List[JumpFlag]:
    """Flag one-cell jumps above threshold * osc(u) and report max a over the jump interval"""
    grid = field_.grid
    u = field_.values
    inside = u[grid.inside]
    if inside.size == 0:
        return []
    osc = float(inside.max() - inside.min())
    if osc == 0.0:
        return []

    flags = []
    for axis in range(grid.dimension):
        n = grid.counts[axis]
        left = [slice(None)] * grid.dimension
        right = [slice(None)] * grid.dimension
        left[axis], right[axis] = slice(0, n - 1), slice(1, n)
        left, right = tuple(left), tuple(right)
        jumps = np.abs(u[right] - u[left])
        flagged = grid.inside[left] & grid.inside[right] & (jumps > gradient_threshold * osc)
        for index in np.argwhere(flagged):
            i = tuple(index)
            j = list(index)
            j[axis] += 1
            ul, ur = float(u[i]), float(u[tuple(j)])
            midpoint = 0.5 * (grid.points[i] + grid.points[tuple(j)])
            states = np.linspace(min(ul, ur), max(ul, ur), state_samples)
            a_values = coeffs.a(states, np.broadcast_to(midpoint, (state_samples, grid.dimension)), field_.t)
            flags.append(JumpFlag(
                axis=axis,
                index=[int(x) for x in index],
                position=midpoint.tolist(),
                jump=abs(ur - ul),
                max_a=float(np.max(a_values)),
            ))
    if flags:
        logger.info(f"Jump scan flagged {len(flags)} cells; largest max-a {max(f.max_a for f in flags):.4g}")
    return flags


def max_jump(field_: Field) -> float:
    """Largest one-cell jump between inside nodes"""
    grid = field_.grid
    u = field_.values
    worst = 0.0
    for axis in range(grid.dimension):
        n = grid.counts[axis]
        left = [slice(None)] * grid.dimension
        right = [slice(None)] * grid.dimension
        left[axis], right[axis] = slice(0, n - 1), slice(1, n)
        left, right = tuple(left), tuple(right)
        valid = grid.inside[left] & grid.inside[right]
        worst = max(worst, float(np.max(np.where(valid, np.abs(u[right] - u[left]), 0.0), initial=0.0)))
    return worst
