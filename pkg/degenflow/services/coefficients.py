from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Optional, Tuple
import logging

import numpy as np

from degenflow.config import settings
from degenflow.errors import CoefficientConsistencyError, ConfigValidationError, NegativeDiffusionError
from degenflow.models import (
    CoefficientSpec,
    DomainKind,
    DomainSpec,
    FactorSpec,
    InitialCondition,
)
from degenflow.utils.geometry import Grid, distance_field, distance_gradient

logger = logging.getLogger(__name__)

Array = np.ndarray


# ---------------------------------------------------------------------------
# Factor types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateFactor:
    """s -> value, with the closed-form antiderivative from 0"""
    name: str
    value: Callable[[Array], Array]
    antiderivative: Callable[[Array], Array]


@dataclass(frozen=True)
class SpaceFactor:
    name: str
    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array]


@dataclass(frozen=True)
class TimeFactor:
    name: str
    value: Callable[[float], float]
    derivative: Callable[[float], float]


@dataclass(frozen=True)
class VectorField:
    """Convection f(x) and its divergence"""
    name: str
    value: Callable[[Array], Array]
    divergence: Callable[[Array], Array]
    is_zero: bool = False


@dataclass(frozen=True)
class ScalarField:
    """Reaction or source term in (x, t)"""
    name: str
    value: Callable[[Array, float], Array]


def _params(path: str, params: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigValidationError(f"{path}.params", f"unknown parameters {sorted(unknown)}")
    return {**defaults, **params}


def _vector(path: str, value, dimension: int) -> np.ndarray:
    vec = np.asarray(value, dtype=float).reshape(-1)
    if vec.size == 1 and dimension > 1:
        vec = np.full(dimension, float(vec[0]))
    if vec.size != dimension:
        raise ConfigValidationError(f"{path}.params", f"expected a {dimension}-vector, got {value}")
    return vec


def _nonnegative(path: str, name: str, value: float) -> float:
    if value < 0:
        raise NegativeDiffusionError(
            f"{path}.params.{name} must be nonnegative, got {value:g}",
            {"field": f"{path}.params.{name}", "value": value},
        )
    return value


def _extent(domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
    bounds = np.asarray(domain.axis_bounds())
    return bounds[:, 0], bounds[:, 1] - bounds[:, 0]


def _sine_terms(domain: DomainSpec, points: Array) -> Tuple[Array, Array, np.ndarray]:
    lo, length = _extent(domain)
    phase = np.pi * (points - lo) / length
    return np.sin(phase), np.cos(phase), length


def _product_gradient(factors: Array, derivatives: Array) -> Array:
    """Gradient of prod_i factors[..., i] given per-axis derivatives"""
    n = factors.shape[-1]
    grad = np.empty(factors.shape)
    for i in range(n):
        others = np.prod(np.delete(factors, i, axis=-1), axis=-1) if n > 1 else 1.0
        grad[..., i] = derivatives[..., i] * others
    return grad


# ---------------------------------------------------------------------------
# State families
# ---------------------------------------------------------------------------

def _state_constant(path, params, domain):
    p = _params(path, params, {"value": 1.0})
    v = _nonnegative(path, "value", float(p["value"]))
    return StateFactor(
        "constant",
        lambda s: np.full(np.shape(s), v),
        lambda s: v * np.asarray(s, dtype=float),
    )


def _state_power(path, params, domain):
    p = _params(path, params, {"exponent": 2.0, "scale": 1.0})
    q, scale = float(p["exponent"]), _nonnegative(path, "scale", float(p["scale"]))
    if q < 0:
        raise ConfigValidationError(f"{path}.params.exponent", "must be nonnegative")
    return StateFactor(
        "power",
        lambda s: scale * np.abs(s) ** q,
        lambda s: scale * np.sign(s) * np.abs(s) ** (q + 1) / (q + 1),
    )


def _state_polynomial(path, params, domain):
    p = _params(path, params, {"coefficients": [1.0]})
    coef = np.asarray(p["coefficients"], dtype=float)
    if coef.size == 0:
        raise ConfigValidationError(f"{path}.params.coefficients", "must not be empty")
    integral = np.concatenate([[0.0], coef / np.arange(1, coef.size + 1)])
    return StateFactor(
        "polynomial",
        lambda s: np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), coef),
        lambda s: np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), integral),
    )


def _state_positive_part(path, params, domain):
    p = _params(path, params, {"threshold": 0.0, "scale": 1.0})
    theta, scale = float(p["threshold"]), _nonnegative(path, "scale", float(p["scale"]))

    def primitive(s):
        return 0.5 * np.maximum(np.asarray(s, dtype=float) - theta, 0.0) ** 2

    return StateFactor(
        "positive_part",
        lambda s: scale * np.maximum(np.asarray(s, dtype=float) - theta, 0.0),
        lambda s: scale * (primitive(s) - primitive(0.0)),
    )


def _state_abs_excess(path, params, domain):
    p = _params(path, params, {"threshold": 1.0, "scale": 1.0})
    theta, scale = float(p["threshold"]), _nonnegative(path, "scale", float(p["scale"]))
    if theta < 0:
        raise ConfigValidationError(f"{path}.params.threshold", "must be nonnegative")
    return StateFactor(
        "abs_excess",
        lambda s: scale * np.maximum(np.abs(s) - theta, 0.0),
        lambda s: scale * np.sign(s) * 0.5 * np.maximum(np.abs(s) - theta, 0.0) ** 2,
    )


# ---------------------------------------------------------------------------
# Space families
# ---------------------------------------------------------------------------

def _space_one(path, params, domain):
    _params(path, params, {})
    return SpaceFactor(
        "one",
        lambda x: np.ones(np.shape(x)[:-1]),
        lambda x: np.zeros(np.shape(x)),
    )


def _space_distance_power(path, params, domain):
    p = _params(path, params, {"exponent": 2.0, "scale": 1.0})
    q, scale = float(p["exponent"]), _nonnegative(path, "scale", float(p["scale"]))
    if q < 1:
        raise ConfigValidationError(f"{path}.params.exponent", "must be >= 1")

    def value(x):
        return scale * np.maximum(distance_field(domain, x), 0.0) ** q

    def gradient(x):
        d = np.maximum(distance_field(domain, x), 0.0)
        return (scale * q * d ** (q - 1))[..., None] * distance_gradient(domain, x)

    return SpaceFactor("distance_power", value, gradient)


def _space_bubble(path, params, domain):
    p = _params(path, params, {"scale": 1.0})
    scale = _nonnegative(path, "scale", float(p["scale"]))

    if domain.kind == DomainKind.UNIT_BALL:
        return SpaceFactor(
            "bubble",
            lambda x: scale * (1.0 - np.sum(np.asarray(x) ** 2, axis=-1)),
            lambda x: -2.0 * scale * np.asarray(x, dtype=float),
        )

    bounds = np.asarray(domain.axis_bounds())
    lo, hi = bounds[:, 0], bounds[:, 1]

    def value(x):
        return scale * np.prod((x - lo) * (hi - x), axis=-1)

    def gradient(x):
        return scale * _product_gradient((x - lo) * (hi - x), lo + hi - 2.0 * x)

    return SpaceFactor("bubble", value, gradient)


def _space_trigonometric(path, params, domain):
    p = _params(path, params, {"amplitude": 0.5})
    amp = float(p["amplitude"])
    if abs(amp) > 1:
        raise ConfigValidationError(f"{path}.params.amplitude", "|amplitude| must be <= 1")

    def value(x):
        sin, _, _ = _sine_terms(domain, x)
        return 1.0 + amp * np.prod(sin, axis=-1)

    def gradient(x):
        sin, cos, length = _sine_terms(domain, x)
        return amp * _product_gradient(sin, np.pi / length * cos)

    return SpaceFactor("trigonometric", value, gradient)


# ---------------------------------------------------------------------------
# Time families
# ---------------------------------------------------------------------------

def _time_one(path, params, domain):
    _params(path, params, {})
    return TimeFactor("one", lambda t: 1.0, lambda t: 0.0)


def _time_linear(path, params, domain):
    p = _params(path, params, {"intercept": 1.0, "slope": 0.0})
    b, m = _nonnegative(path, "intercept", float(p["intercept"])), float(p["slope"])
    return TimeFactor("linear", lambda t: b + m * t, lambda t: m)


# ---------------------------------------------------------------------------
# Convection families
# ---------------------------------------------------------------------------

def _conv_zero(path, params, domain):
    _params(path, params, {})
    return VectorField(
        "zero",
        lambda x: np.zeros(np.shape(x)),
        lambda x: np.zeros(np.shape(x)[:-1]),
        is_zero=True,
    )


def _conv_constant(path, params, domain):
    p = _params(path, params, {"velocity": 1.0})
    v = _vector(path, p["velocity"], domain.dimension)
    return VectorField(
        "constant",
        lambda x: np.broadcast_to(v, np.shape(x)).copy(),
        lambda x: np.zeros(np.shape(x)[:-1]),
        is_zero=not np.any(v),
    )


def _conv_affine(path, params, domain):
    n = domain.dimension
    p = _params(path, params, {"velocity": 0.0, "matrix": np.zeros((n, n)).tolist()})
    v = _vector(path, p["velocity"], n)
    m = np.asarray(p["matrix"], dtype=float)
    if m.shape != (n, n):
        raise ConfigValidationError(f"{path}.params.matrix", f"expected a {n}x{n} matrix")
    trace = float(np.trace(m))
    return VectorField(
        "affine",
        lambda x: v + np.asarray(x, dtype=float) @ m.T,
        lambda x: np.full(np.shape(x)[:-1], trace),
    )


def _conv_distance_weighted(path, params, domain):
    p = _params(path, params, {"velocity": 1.0, "exponent": 2.0})
    v = _vector(path, p["velocity"], domain.dimension)
    q = float(p["exponent"])
    if q < 1:
        raise ConfigValidationError(f"{path}.params.exponent", "must be >= 1")

    def value(x):
        d = np.maximum(distance_field(domain, x), 0.0)
        return (d ** q)[..., None] * v

    def divergence(x):
        d = np.maximum(distance_field(domain, x), 0.0)
        return q * d ** (q - 1) * (distance_gradient(domain, x) @ v)

    return VectorField("distance_weighted", value, divergence, is_zero=not np.any(v))


def _conv_trigonometric(path, params, domain):
    p = _params(path, params, {"velocity": 1.0})
    v = _vector(path, p["velocity"], domain.dimension)

    def value(x):
        sin, _, _ = _sine_terms(domain, x)
        return v * sin

    def divergence(x):
        _, cos, length = _sine_terms(domain, x)
        return np.sum(v * np.pi / length * cos, axis=-1)

    return VectorField("trigonometric", value, divergence, is_zero=not np.any(v))


# ---------------------------------------------------------------------------
# Reaction / source families
# ---------------------------------------------------------------------------

def _scalar_constant(path, params, domain):
    p = _params(path, params, {"value": 0.0})
    v = float(p["value"])
    return ScalarField("constant", lambda x, t: np.full(np.shape(x)[:-1], v))


def _scalar_linear_in_time(path, params, domain):
    p = _params(path, params, {"value": 0.0, "slope": 0.0})
    v, m = float(p["value"]), float(p["slope"])
    return ScalarField("linear_in_time", lambda x, t: np.full(np.shape(x)[:-1], v + m * t))


def _scalar_sine_product(path, params, domain):
    p = _params(path, params, {"amplitude": 1.0})
    amp = float(p["amplitude"])

    def value(x, t):
        sin, _, _ = _sine_terms(domain, x)
        return amp * np.prod(sin, axis=-1)

    return ScalarField("sine_product", value)


STATE_FAMILIES = {
    "constant": _state_constant,
    "power": _state_power,
    "polynomial": _state_polynomial,
    "positive_part": _state_positive_part,
    "abs_excess": _state_abs_excess,
}
SPACE_FAMILIES = {
    "one": _space_one,
    "distance_power": _space_distance_power,
    "bubble": _space_bubble,
    "trigonometric": _space_trigonometric,
}
TIME_FAMILIES = {"one": _time_one, "linear": _time_linear}
CONVECTION_FAMILIES = {
    "zero": _conv_zero,
    "constant": _conv_constant,
    "affine": _conv_affine,
    "distance_weighted": _conv_distance_weighted,
    "trigonometric": _conv_trigonometric,
}
REACTION_FAMILIES = {"constant": _scalar_constant, "linear_in_time": _scalar_linear_in_time}
SOURCE_FAMILIES = {"constant": _scalar_constant, "sine_product": _scalar_sine_product}


def _build(registry: Dict[str, Callable], path: str, spec: FactorSpec, domain: DomainSpec):
    builder = registry.get(spec.family)
    if builder is None:
        raise ConfigValidationError(
            f"{path}.family", f"unknown family '{spec.family}', expected one of {sorted(registry)}"
        )
    return builder(path, spec.params, domain)


# ---------------------------------------------------------------------------
# Coefficient sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCoefficients:
    """Coefficients with their spatial factors evaluated once on fixed points"""
    coeffs: "CoefficientSet"
    points: Array
    space_value: Array
    space_gradient: Array
    f: Array
    div_f: Array

    def a(self, u: Array, t: float) -> Array:
        return self.coeffs.state.value(u) * self.space_value * self.coeffs.time.value(t)

    def A(self, u: Array, t: float) -> Array:
        return self.coeffs.state.antiderivative(u) * self.space_value * self.coeffs.time.value(t)

    def a_x(self, u: Array, t: float) -> Array:
        scale = np.asarray(self.coeffs.state.value(u) * self.coeffs.time.value(t))
        return scale[..., None] * self.space_gradient

    def A_x(self, u: Array, t: float) -> Array:
        scale = np.asarray(self.coeffs.state.antiderivative(u) * self.coeffs.time.value(t))
        return scale[..., None] * self.space_gradient

    def c(self, t: float) -> Array:
        return self.coeffs.reaction.value(self.points, t)

    def g(self, t: float) -> Array:
        return self.coeffs.source.value(self.points, t)


@dataclass(frozen=True)
class CoefficientSet:
    """a(s,x,t) = state(s) space(x) time(t), plus convection, reaction and source"""
    domain: DomainSpec
    state: StateFactor
    space: SpaceFactor
    time: TimeFactor
    convection: VectorField
    reaction: ScalarField
    source: ScalarField
    delta1: float = 0.1
    delta2: float = 0.1
    u_range: Optional[Tuple[float, float]] = None

    def a(self, s, x, t: float) -> Array:
        return self.state.value(np.asarray(s, dtype=float)) * self.space.value(np.asarray(x, dtype=float)) * self.time.value(t)

    def a_x(self, s, x, t: float) -> Array:
        scale = np.asarray(self.state.value(np.asarray(s, dtype=float)) * self.time.value(t))
        return scale[..., None] * self.space.gradient(np.asarray(x, dtype=float))

    def a_t(self, s, x, t: float) -> Array:
        return self.state.value(np.asarray(s, dtype=float)) * self.space.value(np.asarray(x, dtype=float)) * self.time.derivative(t)

    def A(self, u, x, t: float) -> Array:
        """Closed-form integral of a from 0 to u"""
        return self.state.antiderivative(np.asarray(u, dtype=float)) * self.space.value(np.asarray(x, dtype=float)) * self.time.value(t)

    def f(self, x) -> Array:
        return self.convection.value(np.asarray(x, dtype=float))

    def div_f(self, x) -> Array:
        return self.convection.divergence(np.asarray(x, dtype=float))

    def c(self, x, t: float) -> Array:
        return self.reaction.value(np.asarray(x, dtype=float), t)

    def g(self, x, t: float) -> Array:
        return self.source.value(np.asarray(x, dtype=float), t)

    def with_u_range(self, u_min: float, u_max: float) -> "CoefficientSet":
        return replace(self, u_range=(float(u_min), float(u_max)))

    def state_samples(self, count: int) -> Array:
        lo, hi = self.u_range if self.u_range is not None else (-1.0, 1.0)
        return np.linspace(lo, hi, count)

    def bind(self, points: Array) -> BoundCoefficients:
        points = np.asarray(points, dtype=float)
        return BoundCoefficients(
            coeffs=self,
            points=points,
            space_value=self.space.value(points),
            space_gradient=self.space.gradient(points),
            f=self.convection.value(points),
            div_f=self.convection.divergence(points),
        )


def _consistency_samples(domain: DomainSpec, margin: float, count: int = 24) -> Array:
    rng = np.random.default_rng(0)
    lo, length = _extent(domain)
    points = lo + length * rng.uniform(0.05, 0.95, size=(4 * count, domain.dimension))
    d = distance_field(domain, points)
    keep = d > 4 * margin
    if domain.kind == DomainKind.UNIT_BALL:
        keep &= np.linalg.norm(points, axis=-1) > 0.1
    else:
        bounds = np.asarray(domain.axis_bounds())
        faces = np.sort(
            np.concatenate([points - bounds[:, 0], bounds[:, 1] - points], axis=-1), axis=-1
        )
        if faces.shape[-1] > 1:
            keep &= faces[:, 1] - faces[:, 0] > 4 * margin
    return points[keep][:count]


def check_consistency(coeffs: CoefficientSet, rel_tol: float = 1e-5) -> None:
    """Cross-check analytic partials of a and div f against central differences"""
    lo, length = _extent(coeffs.domain)
    step = 1e-6 * float(length.max())
    points = _consistency_samples(coeffs.domain, step)
    n = coeffs.domain.dimension

    fd_grad = np.empty(points.shape)
    fd_div = np.zeros(points.shape[0])
    for i in range(n):
        offset = np.zeros(n)
        offset[i] = step
        fd_grad[:, i] = (coeffs.space.value(points + offset) - coeffs.space.value(points - offset)) / (2 * step)
        fd_div += (coeffs.convection.value(points + offset)[:, i] - coeffs.convection.value(points - offset)[:, i]) / (2 * step)

    grad = coeffs.space.gradient(points)
    scale = 1.0 + np.abs(grad).max(initial=0.0)
    gap = np.abs(fd_grad - grad).max(initial=0.0)
    if gap > rel_tol * scale:
        raise CoefficientConsistencyError(
            f"Space factor '{coeffs.space.name}' gradient disagrees with finite differences by {gap:.3g}",
            {"family": coeffs.space.name, "gap": float(gap)},
        )

    div = coeffs.convection.divergence(points)
    scale = 1.0 + np.abs(div).max(initial=0.0)
    gap = np.abs(fd_div - div).max(initial=0.0)
    if gap > rel_tol * scale:
        raise CoefficientConsistencyError(
            f"Convection '{coeffs.convection.name}' divergence disagrees with finite differences by {gap:.3g}",
            {"family": coeffs.convection.name, "gap": float(gap)},
        )


def _lattice(domain: DomainSpec, per_axis: int = 9) -> Array:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in domain.axis_bounds()]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dimension)
    return points[distance_field(domain, points) >= 0.0]


def check_nonnegative(
    coeffs: CoefficientSet,
    T: float = 1.0,
    points: Optional[Array] = None,
    state_samples: int = settings.STATE_SAMPLES,
    time_samples: int = 5,
    tol: float = settings.QUADRATURE_TOL,
) -> None:
    """Raise NegativeDiffusionError if a(s,x,t) < -tol on the sample lattice

    States span u_range (or [-1, 1]), points default to a 9-per-axis lattice
    of the closed domain, times are evenly spaced over [0, T].
    """
    points = _lattice(coeffs.domain) if points is None else np.asarray(points, dtype=float)
    states = coeffs.state_samples(state_samples)
    times = np.linspace(0.0, T, time_samples) if T > 0 else np.array([0.0])
    state_values = np.asarray(coeffs.state.value(states), dtype=float)
    space_values = np.asarray(coeffs.space.value(points), dtype=float)
    time_values = np.array([coeffs.time.value(float(t)) for t in times], dtype=float)

    products = state_values[:, None, None] * space_values[None, :, None] * time_values[None, None, :]
    if products.size == 0:
        return
    worst = float(products.min())
    if worst < -tol:
        i, j, k = np.unravel_index(int(products.argmin()), products.shape)
        raise NegativeDiffusionError(
            f"Diffusion coefficient is negative ({worst:.6g}) at s={states[i]:g}, t={times[k]:g}",
            {"value": worst, "state": float(states[i]), "point": points[j].tolist(), "t": float(times[k])},
        )


def build_coefficients(spec: CoefficientSpec, domain: DomainSpec, T: float = 1.0) -> CoefficientSet:
    """Instantiate the configured families and verify their partials and sign"""
    coeffs = CoefficientSet(
        domain=domain,
        state=_build(STATE_FAMILIES, "coefficients.diffusion.state", spec.diffusion.state, domain),
        space=_build(SPACE_FAMILIES, "coefficients.diffusion.space", spec.diffusion.space, domain),
        time=_build(TIME_FAMILIES, "coefficients.diffusion.time", spec.diffusion.time, domain),
        convection=_build(CONVECTION_FAMILIES, "coefficients.convection", spec.convection, domain),
        reaction=_build(REACTION_FAMILIES, "coefficients.reaction", spec.reaction, domain),
        source=_build(SOURCE_FAMILIES, "coefficients.source", spec.source, domain),
        delta1=spec.delta1,
        delta2=spec.delta2,
        u_range=tuple(spec.u_range) if spec.u_range is not None else None,
    )
    check_consistency(coeffs)
    check_nonnegative(coeffs, T)
    logger.debug(
        f"Coefficients: a = {coeffs.state.name} x {coeffs.space.name} x {coeffs.time.name}, "
        f"f = {coeffs.convection.name}, c = {coeffs.reaction.name}, g = {coeffs.source.name}"
    )
    return coeffs


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def smooth_field(values: Array, grid: Grid, sweeps: int) -> Array:
    """Nearest-neighbour averaging restricted to nodes inside the domain"""
    u = np.where(grid.inside, values, 0.0)
    for _ in range(sweeps):
        total = u.copy()
        count = grid.inside.astype(float)
        for axis in range(grid.dimension):
            for shift in (-1, 1):
                rolled = np.roll(u, shift, axis=axis)
                valid = np.roll(grid.inside, shift, axis=axis)
                edge = [slice(None)] * grid.dimension
                edge[axis] = 0 if shift == 1 else -1
                valid[tuple(edge)] = False
                total += np.where(valid, rolled, 0.0)
                count += valid
        u = np.where(grid.inside, total / np.maximum(count, 1.0), 0.0)
    return u


def _axis(path: str, value, domain: DomainSpec) -> int:
    axis = int(value)
    if not 0 <= axis < domain.dimension:
        raise ConfigValidationError(f"{path}.params.axis", f"axis {axis} out of range")
    return axis


def build_initial_values(ic: InitialCondition, grid: Grid, path: str = "initial") -> Array:
    """Nodal values of a named initial-condition family (zero outside the domain)"""
    domain = grid.domain
    x = grid.points
    lo, length = _extent(domain)
    family = ic.family

    if family == "constant":
        p = _params(path, ic.params, {"value": 1.0})
        values = np.full(grid.counts, float(p["value"]))
    elif family == "sine_product":
        p = _params(path, ic.params, {"amplitude": 1.0})
        sin, _, _ = _sine_terms(domain, x)
        values = float(p["amplitude"]) * np.prod(sin, axis=-1)
    elif family == "box":
        p = _params(path, ic.params, {
            "low": 0.0, "high": 1.0,
            "lower": (lo + 0.25 * length).tolist(), "upper": (lo + 0.75 * length).tolist(),
        })
        lower = _vector(path, p["lower"], domain.dimension)
        upper = _vector(path, p["upper"], domain.dimension)
        inside_box = np.all((x >= lower) & (x <= upper), axis=-1)
        values = np.where(inside_box, float(p["high"]), float(p["low"]))
    elif family == "ramp":
        p = _params(path, ic.params, {"axis": 0, "low": 0.0, "high": 1.0})
        axis = _axis(path, p["axis"], domain)
        frac = (x[..., axis] - lo[axis]) / length[axis]
        values = float(p["low"]) + (float(p["high"]) - float(p["low"])) * frac
    elif family == "step":
        p = _params(path, ic.params, {
            "axis": 0, "position": float(lo[0] + 0.5 * length[0]), "left": 1.0, "right": 0.0,
        })
        axis = _axis(path, p["axis"], domain)
        values = np.where(x[..., axis] < float(p["position"]), float(p["left"]), float(p["right"]))
    elif family == "gaussian":
        p = _params(path, ic.params, {
            "amplitude": 1.0, "center": (lo + 0.5 * length).tolist(), "width": 0.1,
        })
        center = _vector(path, p["center"], domain.dimension)
        r2 = np.sum((x - center) ** 2, axis=-1)
        values = float(p["amplitude"]) * np.exp(-r2 / (2.0 * float(p["width"]) ** 2))
    else:
        raise ConfigValidationError(
            f"{path}.family",
            f"unknown family '{family}', expected one of "
            f"['box', 'constant', 'gaussian', 'ramp', 'sine_product', 'step']",
        )

    return np.where(grid.inside, values.astype(float), 0.0)
