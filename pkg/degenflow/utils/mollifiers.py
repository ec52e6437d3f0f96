"""Piecewise-polynomial mollified sign family

h(s) = (2/eta)(1 - |s|/eta)_+, S = integral of h from 0, I = integral of S from 0.
All three are evaluated in closed form and accept scalars or arrays.
"""
import numpy as np

from degenflow.errors import InvalidParameterError


def _check_eta(eta: float) -> None:
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}", {"eta": eta})


def mollifier_h(eta: float, s):
    _check_eta(eta)
    s = np.asarray(s, dtype=float)
    value = (2.0 / eta) * np.maximum(1.0 - np.abs(s) / eta, 0.0)
    return value if value.ndim else float(value)


def mollifier_S(eta: float, s):
    _check_eta(eta)
    s = np.asarray(s, dtype=float)
    a = np.minimum(np.abs(s), eta) / eta
    value = np.sign(s) * (2.0 * a - a * a)
    return value if value.ndim else float(value)


def saturation_constant(eta: float) -> float:
    """C(eta) with I(s) = |s| - C(eta) once |s| >= eta"""
    _check_eta(eta)
    return eta / 3.0


def mollifier_I(eta: float, s):
    _check_eta(eta)
    s = np.asarray(s, dtype=float)
    m = np.abs(s)
    inner = m * m / eta - m ** 3 / (3.0 * eta * eta)
    value = np.where(m < eta, inner, m - eta / 3.0)
    return value if value.ndim else float(value)


def moment_integral(eta: float, s):
    """Integral of r*h(r) from 0 to s, equal to s*S(s) - I(s)"""
    _check_eta(eta)
    s = np.asarray(s, dtype=float)
    value = s * np.asarray(mollifier_S(eta, s)) - np.asarray(mollifier_I(eta, s))
    return value if value.ndim else float(value)


def sign(s):
    """Symmetric sign with sign(0) = 0"""
    value = np.sign(np.asarray(s, dtype=float))
    return value if value.ndim else float(value)
