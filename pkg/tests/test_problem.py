from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenflow.errors import (
    CoefficientConsistencyError,
    ConfigValidationError,
    InvalidParameterError,
    NegativeDiffusionError,
)
from degenflow.models import CoefficientSpec, ConditionId, DomainSpec, FactorSpec
from degenflow.services.coefficients import (
    SpaceFactor,
    StateFactor,
    build_coefficients,
    check_consistency,
    check_nonnegative,
)
from degenflow.services.problem import (
    StateIntegralTable,
    antiderivative_A,
    entropy_A_eta,
    validate_conditions,
)
from degenflow.utils.geometry import build_grid
from degenflow.utils.mollifiers import saturation_constant

X = np.array([0.4])

QUADRATIC = build_coefficients(
    CoefficientSpec(diffusion={"state": FactorSpec(family="power", params={"exponent": 2.0})}),
    DomainSpec(kind="unit_cube", dimension=1),
)


class TestAntiderivative:
    def test_zero_diffusion(self, make_coeffs):
        coeffs = make_coeffs(state=("constant", {"value": 0.0}))
        assert antiderivative_A(coeffs, 2.0, X, 0.0) == 0.0

    def test_quadratic_state(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        assert antiderivative_A(coeffs, 2.0, X, 0.0) == pytest.approx(8.0 / 3.0, abs=1e-10)

    def test_empty_interval(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        assert antiderivative_A(coeffs, 0.0, X, 0.3) == 0.0

    def test_agrees_with_closed_form(self, make_coeffs):
        coeffs = make_coeffs(state=("polynomial", {"coefficients": [1.0, 0.5, 2.0]}), space=("bubble", {}))
        u = np.array([-1.5, 0.2, 0.9])
        x = np.array([[0.1], [0.5], [0.8]])
        np.testing.assert_allclose(antiderivative_A(coeffs, u, x, 0.0), coeffs.A(u, x, 0.0), atol=1e-10)

    def test_negative_quadrature_node_rejected(self):
        negative = StateFactor("negative", lambda s: -np.ones(np.shape(s)), lambda s: -np.asarray(s, dtype=float))
        with pytest.raises(NegativeDiffusionError):
            antiderivative_A(replace(QUADRATIC, state=negative), 1.0, X, 0.0)

    @given(
        u=st.floats(min_value=-3.0, max_value=3.0),
        v=st.floats(min_value=-3.0, max_value=3.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_monotone(self, u, v):
        low, high = sorted((u, v))
        assert antiderivative_A(QUADRATIC, high, X, 0.0) - antiderivative_A(QUADRATIC, low, X, 0.0) >= -1e-12


class TestEntropyFlux:
    def test_vanishes_at_k(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        assert entropy_A_eta(coeffs, 0.7, X, 0.0, k=0.7, eta=0.1) == pytest.approx(0.0, abs=1e-14)

    def test_unit_diffusion_is_smooth_abs(self, make_coeffs):
        coeffs = make_coeffs()
        value = entropy_A_eta(coeffs, 2.0, X, 0.0, k=0.0, eta=0.5)
        assert value == pytest.approx(2.0 - saturation_constant(0.5), abs=1e-10)

    def test_saturated_increments(self, make_coeffs):
        coeffs = make_coeffs()
        low = entropy_A_eta(coeffs, 2.0, X, 0.0, k=0.0, eta=0.5)
        high = entropy_A_eta(coeffs, 3.5, X, 0.0, k=0.0, eta=0.5)
        assert high - low == pytest.approx(1.5, abs=1e-10)

    def test_bounded_by_increment_of_A(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}), space=("bubble", {}))
        x = np.array([0.3])
        for u in (-1.0, 0.1, 0.45, 2.0):
            value = entropy_A_eta(coeffs, u, x, 0.0, k=0.4, eta=0.2)
            increment = coeffs.A(u, x, 0.0) - coeffs.A(0.4, x, 0.0)
            assert np.sign(value) == np.sign(u - 0.4)
            assert abs(value) <= abs(increment) + 1e-12

    def test_converges_to_signed_increment(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        target = coeffs.A(1.2, X, 0.0) - coeffs.A(0.3, X, 0.0)
        ratios = [float(entropy_A_eta(coeffs, 1.2, X, 0.0, k=0.3, eta=eta) / target)
                  for eta in (0.4, 0.1, 0.01, 0.001)]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] == pytest.approx(1.0, abs=1e-4)

    def test_nonpositive_eta_rejected(self, make_coeffs):
        with pytest.raises(InvalidParameterError):
            entropy_A_eta(make_coeffs(), 1.0, X, 0.0, k=0.0, eta=0.0)

    def test_table_matches_quadrature(self, make_coeffs):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        table = StateIntegralTable.build(coeffs, k=0.2, eta=0.1, u_min=-1.0, u_max=1.0)
        u = np.array([-0.9, 0.0, 0.15, 0.2, 0.27, 0.8])
        expected = entropy_A_eta(coeffs, u, np.broadcast_to(X, (u.size, 1)), 0.0, k=0.2, eta=0.1)
        np.testing.assert_allclose(table(u), expected, atol=1e-6)


class TestCoefficientFamilies:
    def test_unknown_family(self, make_coeffs):
        with pytest.raises(ConfigValidationError) as excinfo:
            make_coeffs(state=("cubic_spline", {}))
        assert excinfo.value.field == "coefficients.diffusion.state.family"

    def test_unknown_parameter(self, make_coeffs):
        with pytest.raises(ConfigValidationError):
            make_coeffs(space=("distance_power", {"power": 2.0}))

    def test_inconsistent_gradient_detected(self, make_coeffs):
        coeffs = make_coeffs(space=("bubble", {}))
        broken = SpaceFactor("broken", coeffs.space.value, lambda x: np.zeros(np.shape(x)))
        with pytest.raises(CoefficientConsistencyError):
            check_consistency(replace(coeffs, space=broken))


class TestNonnegativeDiffusion:
    @pytest.mark.parametrize("factor, family, params, field", [
        ("state", "constant", {"value": -1.0}, "value"),
        ("state", "power", {"scale": -1.0}, "scale"),
        ("state", "positive_part", {"scale": -2.0}, "scale"),
        ("state", "abs_excess", {"scale": -1.0}, "scale"),
        ("space", "distance_power", {"scale": -1.0}, "scale"),
        ("space", "bubble", {"scale": -0.5}, "scale"),
        ("time", "linear", {"intercept": -1.0}, "intercept"),
    ])
    def test_negative_parameter_rejected(self, make_coeffs, factor, family, params, field):
        with pytest.raises(NegativeDiffusionError) as excinfo:
            make_coeffs(**{factor: (family, params)})
        assert excinfo.value.context["field"] == f"coefficients.diffusion.{factor}.params.{field}"

    def test_negative_polynomial_rejected(self, make_coeffs):
        with pytest.raises(NegativeDiffusionError) as excinfo:
            make_coeffs(state=("polynomial", {"coefficients": [1.0, 0.0, -2.0]}))
        assert excinfo.value.context["value"] == pytest.approx(-1.0)
        assert abs(excinfo.value.context["state"]) == 1.0

    def test_decreasing_time_factor_checked_over_horizon(self):
        spec = CoefficientSpec(diffusion={"time": FactorSpec(family="linear", params={"intercept": 1.0, "slope": -2.0})})
        domain = DomainSpec(kind="unit_cube", dimension=1)
        assert build_coefficients(spec, domain, T=0.25).time.value(0.25) == 0.5
        with pytest.raises(NegativeDiffusionError) as excinfo:
            build_coefficients(spec, domain, T=1.0)
        assert excinfo.value.context["t"] == 1.0

    def test_state_range_is_respected(self, make_coeffs):
        coeffs = make_coeffs(state=("polynomial", {"coefficients": [1.0, 0.0, -1.0]}))
        check_nonnegative(coeffs.with_u_range(-1.0, 1.0))
        with pytest.raises(NegativeDiffusionError):
            check_nonnegative(coeffs.with_u_range(-2.0, 2.0))

    def test_zero_diffusion_is_allowed(self, make_coeffs):
        coeffs = make_coeffs(state=("constant", {"value": 0.0}), space=("distance_power", {}))
        check_nonnegative(coeffs, T=2.0)


class TestConditions:
    def _by_id(self, reports):
        return {report.condition: report for report in reports}

    def test_quartic_distance_weight_passes_everything(self, make_coeffs):
        coeffs = make_coeffs(space=("distance_power", {"exponent": 4.0}))
        grid = build_grid(coeffs.domain, [65])
        reports = self._by_id(validate_conditions(coeffs, grid))
        assert set(reports) == set(ConditionId)
        assert all(report.passed for report in reports.values())

    def test_constant_drift_breaks_vanishing_convection(self, make_coeffs):
        coeffs = make_coeffs(space=("distance_power", {"exponent": 4.0}), convection=("constant", {"velocity": 1.0}))
        grid = build_grid(coeffs.domain, [33])
        report = self._by_id(validate_conditions(coeffs, grid))[ConditionId.C2_10]
        assert not report.passed
        assert report.worst_violation == pytest.approx(1.0)

    def test_zero_diffusion_passes_with_equality(self, make_coeffs):
        coeffs = make_coeffs(state=("constant", {"value": 0.0}))
        grid = build_grid(coeffs.domain, [17])
        report = self._by_id(validate_conditions(coeffs, grid))[ConditionId.C2_6]
        assert report.passed
        assert report.worst_violation == 0.0

    def test_gradient_on_boundary_fails(self, make_coeffs):
        coeffs = make_coeffs(space=("bubble", {}))
        grid = build_grid(coeffs.domain, [17])
        report = self._by_id(validate_conditions(coeffs, grid))[ConditionId.C2_9]
        assert not report.passed
        assert report.worst_violation == pytest.approx(1.0)
