from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence
import logging
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from degenflow.config import settings
from degenflow.errors import InvalidParameterError, NumericalBlowupError, StepRejectedError
from degenflow.models import (
    BoundaryMode,
    InterfaceRule,
    Scheme,
    SolverConfig,
    SupNormReport,
    SweepEntry,
    SweepReport,
)
from degenflow.services.classifier import classify_boundary, held_node_mask
from degenflow.services.coefficients import CoefficientSet, check_nonnegative, smooth_field
from degenflow.utils.geometry import Grid
from degenflow.utils.quadrature import trapezoid_time

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[float], None]

# Snapshot count when neither times nor a stride are requested
DEFAULT_SNAPSHOTS = 200


@dataclass(frozen=True)
class Field:
    """Nodal values at one time; nodes outside the domain carry 0"""
    grid: Grid
    values: np.ndarray
    t: float = 0.0


@dataclass
class Trajectory:
    """Snapshots of one run with its producing config and per-step diagnostics"""
    grid: Grid
    fields: List[Field]
    config: SolverConfig
    coeffs: CoefficientSet
    dt: float = 0.0
    held: Optional[np.ndarray] = None
    diagnostics: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fields])

    @property
    def values(self) -> np.ndarray:
        """Stacked snapshot values, time first"""
        return np.stack([f.values for f in self.fields])

    @property
    def final(self) -> Field:
        return self.fields[-1]


def _shift(arr: np.ndarray, axis: int, shift: int, fill) -> np.ndarray:
    """out[j] = arr[j + shift] along `axis`, `fill` where that falls off the grid"""
    out = np.full_like(arr, fill)
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if shift > 0:
        dst[axis], src[axis] = slice(0, -shift), slice(shift, None)
    else:
        dst[axis], src[axis] = slice(-shift, None), slice(0, shift)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _face_slices(ndim: int, axis: int):
    left = [slice(None)] * ndim
    right = [slice(None)] * ndim
    left[axis] = slice(0, -1)
    right[axis] = slice(1, None)
    return tuple(left), tuple(right)


# ---------------------------------------------------------------------------
# Discrete functionals on fields
# ---------------------------------------------------------------------------

def _face_weight(grid: Grid, axis: int) -> np.ndarray:
    """Measure attached to each face along `axis`, divided by the spacing on that axis"""
    left, _ = _face_slices(grid.dimension, axis)
    weight = np.full(tuple(n - 1 if i == axis else n for i, n in enumerate(grid.counts)),
                     float(np.prod(grid.spacing)) / grid.spacing[axis])
    for other in range(grid.dimension):
        if other != axis:
            weight = weight * grid.theta[other][left]
    return weight


def total_variation(field_: Field) -> float:
    """Discrete L1 norm of the gradient: sum of |jumps| times face measure"""
    grid = field_.grid
    u = field_.values
    total = 0.0
    for axis in range(grid.dimension):
        left, right = _face_slices(grid.dimension, axis)
        valid = grid.inside[left] & grid.inside[right]
        jumps = np.abs(u[right] - u[left])
        total += float(np.sum(np.where(valid, jumps, 0.0) * _face_weight(grid, axis)))
    return total


def l1_norm(values: np.ndarray, grid: Grid) -> float:
    return float(np.sum(np.abs(values) * grid.weights))


def l1_distance(u: Field, v: Field) -> float:
    return l1_norm(u.values - v.values, u.grid)


def sup_norm(values: np.ndarray, grid: Grid) -> float:
    return float(np.max(np.abs(np.where(grid.inside, values, 0.0)), initial=0.0))


def energy_density(field_: Field, coeffs: CoefficientSet) -> float:
    """Integral of a(u,x,t)|grad u|^2 over the domain, midpoint rule on faces"""
    grid = field_.grid
    u = field_.values
    total = 0.0
    for axis in range(grid.dimension):
        left, right = _face_slices(grid.dimension, axis)
        valid = grid.inside[left] & grid.inside[right]
        x_face = 0.5 * (grid.points[left] + grid.points[right])
        a_face = coeffs.a(0.5 * (u[left] + u[right]), x_face, field_.t)
        slope = (u[right] - u[left]) / grid.spacing[axis]
        total += float(np.sum(np.where(valid, a_face * slope ** 2, 0.0) * _face_weight(grid, axis) * grid.spacing[axis]))
    return total


def energy_functional(traj: Trajectory, coeffs: Optional[CoefficientSet] = None) -> float:
    """Time-trapezoid of the energy density over the snapshots"""
    if len(traj.fields) < 2:
        raise InvalidParameterError("The energy functional needs at least two snapshots")
    coeffs = coeffs or traj.coeffs
    densities = np.array([energy_density(f, coeffs) for f in traj.fields])
    return trapezoid_time(densities, traj.times)


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

class SolverContext:
    """Per-run precomputation: bound coefficients, face geometry, held nodes, implicit factor"""

    def __init__(self, grid: Grid, coeffs: CoefficientSet, config: SolverConfig, held: Optional[np.ndarray] = None):
        self.grid = grid
        self.coeffs = coeffs
        self.config = config
        self.held = np.zeros(grid.counts, dtype=bool) if held is None else held
        self.active = grid.inside & ~self.held
        self.nodes = coeffs.bind(grid.points)
        self.implicit = config.scheme == Scheme.IMEX_DIFFUSION and config.epsilon > 0
        self.explicit_epsilon = 0.0 if self.implicit else config.epsilon

        ndim = grid.dimension
        self.faces = []
        self.valid_faces = []
        self.next_inside = []
        self.prev_inside = []
        for axis in range(ndim):
            left, right = _face_slices(ndim, axis)
            self.faces.append(coeffs.bind(0.5 * (grid.points[left] + grid.points[right])))
            self.valid_faces.append(grid.inside[left] & grid.inside[right])
            self.next_inside.append(_shift(grid.inside, axis, 1, False))
            self.prev_inside.append(_shift(grid.inside, axis, -1, False))

        self._space_max = float(np.max(np.abs(self.nodes.space_value[grid.inside]), initial=0.0))
        self._f_abs_max = np.array([
            float(np.max(np.abs(self.nodes.f[..., axis][grid.inside]), initial=0.0)) for axis in range(ndim)
        ])
        self._implicit_dt = None
        self._implicit_solve = None

    # -- stability -----------------------------------------------------

    def _max_diffusion(self, u: np.ndarray, t: float) -> float:
        inside = u[self.grid.inside]
        if inside.size == 0:
            return 0.0
        states = np.linspace(inside.min(), inside.max(), 33)
        state_max = float(np.max(np.abs(self.coeffs.state.value(states))))
        return state_max * self._space_max * abs(self.coeffs.time.value(t))

    def _max_reaction(self, t: float) -> float:
        return float(np.max(np.abs(self.nodes.c(t)[self.grid.inside]), initial=0.0))

    def admissible_dt(self, u: np.ndarray, t: float) -> float:
        """Largest dt meeting every individual CFL bound for the current state"""
        safety = self.config.cfl_safety
        h = self.grid.h_min
        bounds = [math.inf]
        diffusion = self.explicit_epsilon + self._max_diffusion(u, t)
        if diffusion > 0:
            bounds.append(safety * h * h / (2 * self.grid.dimension * diffusion))
        f_max = float(self._f_abs_max.max(initial=0.0))
        if f_max > 0:
            bounds.append(safety * h / f_max)
        c_max = self._max_reaction(t)
        if c_max > 0:
            bounds.append(safety / c_max)
        return min(bounds)

    def monotone_dt(self, diffusion_max: float, c_max: float) -> float:
        """Step keeping every explicit update coefficient nonnegative"""
        rate = 2 * self.grid.dimension * (self.explicit_epsilon + diffusion_max) / self.grid.h_min ** 2
        rate += float(self._f_abs_max.max(initial=0.0)) / self.grid.h_min * self.grid.dimension + c_max
        return self.config.cfl_safety / rate if rate > 0 else math.inf

    # -- operators -----------------------------------------------------

    def _face_flux(self, axis: int, u: np.ndarray, t: float) -> np.ndarray:
        left, right = _face_slices(self.grid.dimension, axis)
        h = self.grid.spacing[axis]
        ul, ur = u[left], u[right]
        face = self.faces[axis]
        rule = self.config.interface
        if rule == InterfaceRule.KIRCHHOFF:
            flux = (face.A(ur, t) - face.A(ul, t)) / h
        else:
            if rule == InterfaceRule.ARITHMETIC:
                a_nodes = self.nodes.a(u, t)
                a_face = 0.5 * (a_nodes[left] + a_nodes[right])
            else:
                a_face = face.a(0.5 * (ul + ur), t)
            flux = a_face * (ur - ul) / h
        flux = flux + self.explicit_epsilon * (ur - ul) / h
        return np.where(self.valid_faces[axis], flux, 0.0)

    def diffusion_divergence(self, u: np.ndarray, t: float) -> np.ndarray:
        grid = self.grid
        total = np.zeros(grid.counts)
        mode = self.config.boundary_mode
        a_nodes = self.nodes.a(u, t) if mode == BoundaryMode.NONE else None
        for axis in range(grid.dimension):
            left, right = _face_slices(grid.dimension, axis)
            h = grid.spacing[axis]
            flux = self._face_flux(axis, u, t)
            div = np.zeros(grid.counts)
            div[left] += flux
            div[right] -= flux
            if mode == BoundaryMode.NONE:
                # linear ghost extrapolation across faces leaving the domain
                coef = a_nodes + self.explicit_epsilon
                u_prev = _shift(u, axis, -1, 0.0)
                u_next = _shift(u, axis, 1, 0.0)
                right_open = grid.inside & ~self.next_inside[axis] & self.prev_inside[axis]
                left_open = grid.inside & ~self.prev_inside[axis] & self.next_inside[axis]
                div += np.where(right_open, coef * (u - u_prev) / h, 0.0)
                div -= np.where(left_open, coef * (u_next - u) / h, 0.0)
            total += div / (h * grid.theta[axis])
        return total

    def convection(self, u: np.ndarray) -> np.ndarray:
        """Upwinded f_i D_i u; a missing upwind neighbour contributes nothing"""
        grid = self.grid
        total = np.zeros(grid.counts)
        for axis in range(grid.dimension):
            f = self.nodes.f[..., axis]
            if not np.any(f):
                continue
            h = grid.spacing[axis]
            forward = np.where(self.next_inside[axis], (_shift(u, axis, 1, 0.0) - u) / h, 0.0)
            backward = np.where(self.prev_inside[axis], (u - _shift(u, axis, -1, 0.0)) / h, 0.0)
            total += np.where(f > 0, f * forward, f * backward)
        return total

    def rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        return (
            self.diffusion_divergence(u, t)
            + self.convection(u)
            - self.nodes.c(t) * u
            + self.nodes.g(t)
        )

    def _implicit_operator(self, dt: float):
        if self._implicit_dt == dt:
            return self._implicit_solve
        grid = self.grid
        number = -np.ones(grid.counts, dtype=np.int64)
        number[self.active] = np.arange(int(self.active.sum()))
        rows, cols, vals = [], [], []

        def add(r, c, v):
            keep = r >= 0
            c = np.where(keep & (c >= 0), c, -1)
            rows.append(r[keep]); vals.append(v[keep]); cols.append(c[keep])

        eps = self.config.epsilon
        for axis in range(grid.dimension):
            left, right = _face_slices(grid.dimension, axis)
            w = eps / grid.spacing[axis] ** 2
            valid = self.valid_faces[axis]
            nl, nr = number[left][valid], number[right][valid]
            wl = (w / grid.theta[axis][left])[valid]
            wr = (w / grid.theta[axis][right])[valid]
            add(nl, nr, wl); add(nl, nl, -wl)
            add(nr, nl, wr); add(nr, nr, -wr)
            if self.config.boundary_mode == BoundaryMode.NONE:
                theta = grid.theta[axis]
                right_open = grid.inside & ~self.next_inside[axis] & self.prev_inside[axis]
                left_open = grid.inside & ~self.prev_inside[axis] & self.next_inside[axis]
                for open_mask, shift in ((right_open, -1), (left_open, 1)):
                    n_self = number[open_mask]
                    n_other = _shift(number, axis, shift, -1)[open_mask]
                    wt = (w / theta)[open_mask]
                    add(n_self, n_self, wt); add(n_self, n_other, -wt)

        rows = np.concatenate(rows); cols = np.concatenate(cols); vals = np.concatenate(vals)
        keep = cols >= 0
        size = int(self.active.sum())
        laplacian = sparse.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(size, size)).tocsc()
        system = (sparse.identity(size, format="csc") - dt * laplacian).tocsc()
        self._implicit_solve = factorized(system)
        self._implicit_dt = dt
        return self._implicit_solve

    def advance(self, u: np.ndarray, t: float, dt: float) -> np.ndarray:
        admissible = self.admissible_dt(u, t)
        if dt > admissible * (1 + 1e-12):
            raise StepRejectedError(dt, admissible)
        update = u + dt * self.rhs(u, t)
        new = np.where(self.active, update, u)
        if self.implicit:
            solve = self._implicit_operator(dt)
            new[self.active] = solve(new[self.active])
        if not np.all(np.isfinite(new)):
            raise NumericalBlowupError(
                f"Non-finite values after the step at t={t:g}", {"t": t, "dt": dt}
            )
        return new


def resolve_held_nodes(grid: Grid, coeffs: CoefficientSet, config: SolverConfig) -> np.ndarray:
    mode = config.boundary_mode
    if mode == BoundaryMode.DIRICHLET_ALL:
        return grid.boundary.copy()
    if mode == BoundaryMode.DIRICHLET_SIGMA_P:
        times = np.linspace(0.0, config.T, 5).tolist() if config.T > 0 else [0.0]
        classification = classify_boundary(grid, coeffs, t=0.0, time_samples=times)
        return held_node_mask(grid, classification)
    return np.zeros(grid.counts, dtype=bool)


def step(field_: Field, coeffs: CoefficientSet, config: SolverConfig, held: Optional[np.ndarray] = None) -> Field:
    """One forward step of the regularized problem

    Held nodes and nodes outside the domain are set to 0 before stepping, as `solve` does.
    """
    grid = field_.grid
    if held is None:
        held = resolve_held_nodes(grid, coeffs, config)
    context = SolverContext(grid, coeffs, config, held)
    start = np.where(held | ~grid.inside, 0.0, field_.values)
    dt = config.dt if config.dt is not None else context.admissible_dt(start, field_.t)
    values = context.advance(start, field_.t, dt)
    return Field(grid=field_.grid, values=values, t=field_.t + dt)


def _auto_dt(context: SolverContext, coeffs: CoefficientSet, u0: np.ndarray, T: float) -> float:
    """Monotone step valid over the whole run, using the sup-norm growth bound"""
    grid = context.grid
    c_values = [context.nodes.c(t)[grid.inside] for t in (0.0, T)]
    g_values = [context.nodes.g(t)[grid.inside] for t in (0.0, T)]
    c_min = min(float(np.min(v, initial=0.0)) for v in c_values)
    c_max = max(float(np.max(np.abs(v), initial=0.0)) for v in c_values)
    g_max = max(float(np.max(np.abs(v), initial=0.0)) for v in g_values)
    growth = max(-c_min, 0.0)
    bound = math.exp(growth * T) * (sup_norm(u0, grid) + T * g_max)
    if coeffs.u_range is not None:
        bound = max(bound, abs(coeffs.u_range[0]), abs(coeffs.u_range[1]))
    states = np.linspace(-bound, bound, 65)
    state_max = float(np.max(np.abs(coeffs.state.value(states))))
    time_max = max(abs(coeffs.time.value(0.0)), abs(coeffs.time.value(T)))
    diffusion_max = state_max * context._space_max * time_max
    return context.monotone_dt(diffusion_max, c_max)


def stable_dt(u0: Field, coeffs: CoefficientSet, config: SolverConfig) -> float:
    """The step `solve` would pick for u0; pairs share the smaller of their two steps"""
    context = SolverContext(u0.grid, coeffs, config)
    dt = _auto_dt(context, coeffs, u0.values, config.T)
    return config.T if math.isinf(dt) else dt


def solve(
    u0: Field,
    coeffs: CoefficientSet,
    config: SolverConfig,
    snapshot_times: Optional[Sequence[float]] = None,
    progress: Optional[ProgressCallback] = None,
) -> Trajectory:
    """Integrate from u0 to config.T with a uniform step

    Snapshots land on `snapshot_times` (rounded to the step grid) or every
    `config.snapshot_every` steps; t=0 and T are always included.
    """
    grid = u0.grid
    values = smooth_field(u0.values, grid, config.smoothing_sweeps)
    if coeffs.u_range is None:
        bound = sup_norm(values, grid)
        coeffs = coeffs.with_u_range(-bound, bound)
    check_nonnegative(coeffs, config.T, points=grid.points[grid.inside])

    held = resolve_held_nodes(grid, coeffs, config)
    if np.any(values[held] != 0.0):
        logger.warning("Initial data is nonzero on held boundary nodes; projecting to zero")
    values = np.where(held | ~grid.inside, 0.0, values)
    context = SolverContext(grid, coeffs, config, held)

    if config.T == 0:
        return Trajectory(grid=grid, fields=[Field(grid, values, 0.0)], config=config, coeffs=coeffs,
                          dt=0.0, held=held, diagnostics=_diagnostics_seed(values, grid, coeffs, 0.0))

    dt = config.dt if config.dt is not None else _auto_dt(context, coeffs, values, config.T)
    if math.isinf(dt):
        dt = config.T
    n_steps = max(1, math.ceil(config.T / dt - 1e-9))
    dt_eff = config.T / n_steps
    if config.dt is not None and dt_eff < dt:
        logger.debug(f"Step shortened from {dt:g} to {dt_eff:g} to land on T={config.T:g}")

    if snapshot_times is not None:
        wanted = {min(n_steps, max(0, int(round(t / dt_eff)))) for t in snapshot_times}
    else:
        every = config.snapshot_every or max(1, n_steps // DEFAULT_SNAPSHOTS)
        wanted = set(range(0, n_steps + 1, every))
    wanted |= {0, n_steps}

    logger.info(
        f"Solving on grid {grid.counts} to T={config.T:g}: {n_steps} steps of dt={dt_eff:.4g}, "
        f"scheme={config.scheme.value}, boundary={config.boundary_mode.value}, eps={config.epsilon:g}"
    )

    diagnostics = _diagnostics_seed(values, grid, coeffs, 0.0)
    fields = [Field(grid, values.copy(), 0.0)]
    u = values
    report_every = max(1, n_steps // 100)
    for n in range(1, n_steps + 1):
        t = (n - 1) * dt_eff
        u = context.advance(u, t, dt_eff)
        t_next = n * dt_eff
        _record(diagnostics, u, grid, coeffs, t_next)
        if n in wanted:
            fields.append(Field(grid, u.copy(), t_next))
        if n % report_every == 0:
            logger.debug(f"step {n}/{n_steps} t={t_next:.4g} sup={diagnostics['sup_norm'][-1]:.6g}")
            if progress is not None:
                progress(n / n_steps)

    logger.info(f"Solve finished: sup norm {diagnostics['sup_norm'][-1]:.6g} at T={config.T:g}")
    return Trajectory(grid=grid, fields=fields, config=config, coeffs=coeffs, dt=dt_eff,
                      held=held, diagnostics=diagnostics)


def _diagnostics_seed(values, grid, coeffs, t) -> Dict[str, List[float]]:
    diagnostics = {"time": [], "sup_norm": [], "total_variation": [], "energy_density": [], "energy": []}
    _record(diagnostics, values, grid, coeffs, t)
    return diagnostics


def _record(diagnostics, values, grid, coeffs, t) -> None:
    snapshot = Field(grid, values, t)
    density = energy_density(snapshot, coeffs)
    if diagnostics["time"]:
        dt = t - diagnostics["time"][-1]
        accumulated = diagnostics["energy"][-1] + 0.5 * dt * (density + diagnostics["energy_density"][-1])
    else:
        accumulated = 0.0
    diagnostics["time"].append(float(t))
    diagnostics["sup_norm"].append(sup_norm(values, grid))
    diagnostics["total_variation"].append(total_variation(snapshot))
    diagnostics["energy_density"].append(density)
    diagnostics["energy"].append(float(accumulated))


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------

def sup_norm_monitor(traj: Trajectory, slack: float = settings.SUP_NORM_SLACK) -> SupNormReport:
    """Snapshot sup norms against the maximum-principle bounds

    Generalized: |u(t)| <= exp(Ct)(|u0| + t|g|) with C = max(-min c, 0).
    Strict: |u(t)| <= |u0|, applicable when c >= 0 and g = 0.
    """
    grid = traj.grid
    bound_coeffs = traj.coeffs.bind(grid.points)
    times = traj.times
    c_min = min(float(np.min(bound_coeffs.c(t)[grid.inside], initial=0.0)) for t in times)
    g_max = max(float(np.max(np.abs(bound_coeffs.g(t)[grid.inside]), initial=0.0)) for t in times)
    growth = max(-c_min, 0.0)

    norms = np.array([sup_norm(f.values, grid) for f in traj.fields])
    u0_norm = norms[0]
    generalized = np.exp(growth * times) * (u0_norm + times * g_max)
    excess = norms - generalized
    strict_applicable = c_min >= 0 and g_max == 0
    strict_holds = bool(np.all(norms <= u0_norm + slack)) if strict_applicable else None

    return SupNormReport(
        times=times.tolist(),
        sup_norms=norms.tolist(),
        generalized_bound=generalized.tolist(),
        generalized_bound_holds=bool(np.all(excess <= slack)),
        strict_bound_applicable=strict_applicable,
        strict_bound_holds=strict_holds,
        worst_excess=float(excess.max()),
        slack=slack,
    )


def viscosity_sweep(
    u0: Field,
    coeffs: CoefficientSet,
    base_config: SolverConfig,
    epsilons: Sequence[float],
    tv_factor: float = 1.1,
    progress: Optional[ProgressCallback] = None,
) -> SweepReport:
    """Solve for each viscosity on a common grid and compare consecutive solutions at T"""
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0 for e in epsilons) or any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise InvalidParameterError(f"Viscosities must be positive and strictly decreasing, got {epsilons}")

    tv0 = total_variation(u0)
    finals: List[Field] = []
    entries: List[SweepEntry] = []
    for i, eps in enumerate(epsilons):
        config = base_config.model_copy(update={"epsilon": eps})
        traj = solve(u0, coeffs, config)
        final = traj.final
        tv_final = total_variation(final)
        entries.append(SweepEntry(
            epsilon=eps,
            sup_norm=sup_norm(final.values, final.grid),
            tv_final=tv_final,
            tv_ratio=tv_final / tv0 if tv0 > 0 else None,
            energy=energy_functional(traj) if len(traj.fields) > 1 else 0.0,
        ))
        finals.append(final)
        if progress is not None:
            progress((i + 1) / len(epsilons))

    distances = [l1_distance(a, b) for a, b in zip(finals, finals[1:])]
    for entry, distance in zip(entries, distances):
        entry.l1_to_next = distance

    energies = [e.energy for e in entries]
    spread = None
    if energies and max(energies) > 0:
        spread = (max(energies) - min(energies)) / max(energies)
    cauchy = all(b <= a + 1e-12 for a, b in zip(distances, distances[1:]))
    tv_bounded = all(e.tv_ratio is None or e.tv_ratio <= tv_factor for e in entries)
    logger.info(f"Viscosity sweep over {epsilons}: L1 gaps {distances}, energy spread {spread}")
    return SweepReport(
        entries=entries,
        cauchy_nonincreasing=cauchy,
        energy_spread=spread,
        tv_bounded=tv_bounded,
        passed=cauchy and tv_bounded,
    )
