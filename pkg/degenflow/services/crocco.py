"""Crocco variables for monotone boundary-layer profiles

For a profile u(y) strictly increasing in y, the map eta = u(y), w(eta) = u_y
turns the profile into a graph over the velocity itself; the inverse
recovers y(eta) = integral of 1/w and resamples u on the original ordinates.
"""
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple
import logging

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from degenflow.errors import DegenerateTransformError, InvalidParameterError, NotInvertibleError
from degenflow.models import CroccoReport, CroccoSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CroccoProfile:
    y: np.ndarray
    u: np.ndarray
    eta: np.ndarray
    w: np.ndarray


def crocco_transform(y, u, samples: Optional[int] = None) -> CroccoProfile:
    """w on a uniform eta grid from sampled (y, u(y))"""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if y.ndim != 1 or y.shape != u.shape or y.size < 3:
        raise InvalidParameterError("Profile needs matching 1D arrays of at least 3 samples",
                                    {"y_size": int(y.size), "u_size": int(u.size)})
    if np.any(np.diff(y) <= 0):
        raise InvalidParameterError("Profile ordinates must be strictly increasing")
    u_y = np.gradient(u, y, edge_order=2)
    if np.any(np.diff(u) <= 0) or np.any(u_y <= 0):
        worst = int(np.argmin(u_y))
        raise NotInvertibleError(
            "Profile is not strictly increasing; the velocity cannot serve as a coordinate",
            {"y": float(y[worst]), "u_y": float(u_y[worst])},
        )
    eta = np.linspace(u[0], u[-1], samples or y.size)
    w = PchipInterpolator(u, u_y)(eta)
    return CroccoProfile(y=y, u=u, eta=eta, w=w)


def crocco_inverse(profile: CroccoProfile, refine: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """(y, u(y)) from w(eta), sampled on the profile's own ordinates"""
    if np.any(profile.w <= 0):
        worst = int(np.argmin(profile.w))
        raise DegenerateTransformError(
            "w vanishes or changes sign; y(eta) is not defined",
            {"eta": float(profile.eta[worst]), "w": float(profile.w[worst])},
        )
    fine = np.linspace(profile.eta[0], profile.eta[-1], refine * (profile.eta.size - 1) + 1)
    w_fine = PchipInterpolator(profile.eta, profile.w)(fine)
    if np.any(w_fine <= 0):
        raise DegenerateTransformError("Interpolated w is not positive on the eta range")
    y_of_eta = profile.y[0] + cumulative_trapezoid(1.0 / w_fine, fine, initial=0.0)
    return profile.y.copy(), np.interp(profile.y, y_of_eta, fine)


# name -> (profile u(y), analytic law w(eta))
NAMED_PROFILES: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]] = {
    "tanh": (np.tanh, lambda eta: 1.0 - eta ** 2),
    "exponential": (lambda y: 1.0 - np.exp(-y), lambda eta: 1.0 - eta),
    "linear": (lambda y: np.asarray(y, dtype=float), np.ones_like),
}


def crocco_report(crocco: CroccoSettings) -> CroccoReport:
    shape, law = NAMED_PROFILES[crocco.profile]
    y = np.linspace(0.0, crocco.y_max, crocco.samples)
    u = shape(y)
    profile = crocco_transform(y, u)
    w_error = float(np.max(np.abs(profile.w - law(profile.eta))))
    _, u_back = crocco_inverse(profile)
    round_trip = float(np.max(np.abs(u_back - u)))
    passed = w_error <= crocco.tolerance and round_trip <= crocco.tolerance
    logger.info(f"Crocco {crocco.profile}: w-law error {w_error:.3g}, round trip {round_trip:.3g}")
    return CroccoReport(
        profile=crocco.profile,
        samples=crocco.samples,
        w_law_error=w_error,
        round_trip_error=round_trip,
        tolerance=crocco.tolerance,
        passed=passed,
    )
