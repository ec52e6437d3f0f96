import math

import numpy as np
import pytest

from degenflow.errors import (
    IncompatibleTrajectoriesError,
    InvalidParameterError,
    InvalidTestFunctionError,
)
from degenflow.models import DomainSpec, SolverConfig, VerificationSettings
from degenflow.services.problem import validate_conditions
from degenflow.services.solver import Field, Trajectory, solve, stable_dt
from degenflow.services.verify import (
    BOUNDARY_TERMS,
    SpaceTimeBump,
    boundary_test_function,
    classical_entropy_residual,
    comparison_functional,
    comparison_report,
    comparison_terms,
    default_comparison_lambdas,
    default_entropy_lambda,
    entropy_report,
    jump_degeneracy_scan,
    l1_contraction_report,
    max_jump,
    regularized_entropy_residual,
    residual_tolerance,
)
from degenflow.utils.geometry import build_grid

UNIT_INTERVAL = DomainSpec(kind="unit_cube", dimension=1)


def _frozen(field_, coeffs, times=np.linspace(0.0, 1.0, 21)):
    """Trajectory that holds one field fixed over the given snapshot times"""
    fields = [Field(field_.grid, field_.values, float(t)) for t in times]
    return Trajectory(grid=field_.grid, fields=fields, config=SolverConfig(T=float(times[-1])), coeffs=coeffs)


def _pair(u0, v0, coeffs, **config):
    """Solve both data with one shared step"""
    base = SolverConfig(**config)
    if base.dt is None:
        dt = min(stable_dt(u0, coeffs, base), stable_dt(v0, coeffs, base))
        base = base.model_copy(update={"dt": dt})
    return solve(u0, coeffs, base), solve(v0, coeffs, base)


class TestTestFunctions:
    def test_boundary_weight_profile(self):
        phi = boundary_test_function(build_grid(UNIT_INTERVAL, [101]), 0.2)
        assert phi.values[0] == 0.0
        assert phi.values[-1] == pytest.approx(0.0, abs=1e-12)
        assert phi.values[50] == 1.0
        assert phi.values[10] == pytest.approx(0.75)
        assert np.all((phi.values >= 0.0) & (phi.values <= 1.0))

    @pytest.mark.parametrize("lam", [0.0, -0.1, 0.5, 2.0])
    def test_lambda_must_fit_inside(self, lam):
        with pytest.raises(InvalidParameterError):
            boundary_test_function(build_grid(UNIT_INTERVAL, [17]), lam)

    def test_negative_amplitude_rejected(self):
        bump = SpaceTimeBump(lam=0.1, window=(0.0, 1.0), amplitude=-1.0)
        with pytest.raises(InvalidTestFunctionError):
            bump.spatial(build_grid(UNIT_INTERVAL, [33]))

    def test_empty_window_rejected(self):
        with pytest.raises(InvalidParameterError):
            SpaceTimeBump(lam=0.1, window=(0.5, 0.5))

    def test_time_factor(self):
        bump = SpaceTimeBump(lam=0.1, window=(0.0, 2.0), amplitude=3.0)
        assert bump.time_factor(-0.1) == (0.0, 0.0)
        assert bump.time_factor(0.0) == (0.0, 0.0)
        b, b_t = bump.time_factor(1.0)
        assert b == pytest.approx(3.0)
        assert b_t == pytest.approx(0.0, abs=1e-12)
        assert bump.sup_norm == 3.0

    def test_interior_profile_vanishes_near_boundary(self):
        grid = build_grid(UNIT_INTERVAL, [101])
        weight = SpaceTimeBump(lam=0.1, window=(0.0, 1.0)).spatial(grid)
        assert np.all(weight.values[:10] == 0.0)
        assert np.all(weight.values[-10:] == 0.0)
        assert weight.values[50] == 1.0

    def test_defaults(self):
        assert default_entropy_lambda(build_grid(UNIT_INTERVAL, [33])) == 0.1
        thin = DomainSpec(kind="interval_product", dimension=1, bounds=[(0.0, 0.2)])
        assert default_entropy_lambda(build_grid(thin, [33])) == pytest.approx(0.025)
        assert default_comparison_lambdas(build_grid(UNIT_INTERVAL, [33])) == [0.25, 0.125, 0.0625]
        assert default_comparison_lambdas(build_grid(UNIT_INTERVAL, [9])) == [0.25]

    def test_tolerance_scales_with_resolution(self):
        coarse = residual_tolerance(build_grid(UNIT_INTERVAL, [33]), 1e-3, 0.1)
        fine = residual_tolerance(build_grid(UNIT_INTERVAL, [65]), 5e-4, 0.1)
        assert fine == pytest.approx(coarse / 2)


class TestEntropyResiduals:
    def test_constant_state_at_k_gives_zero(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        traj = _frozen(make_field([33], "constant", value=0.3), coeffs)
        bump = SpaceTimeBump(lam=0.1, window=(0.0, 1.0))
        assert classical_entropy_residual(traj, coeffs, 0.3, bump) == 0.0
        assert regularized_entropy_residual(traj, coeffs, 0.3, 0.1, bump) == pytest.approx(0.0, abs=1e-12)

    def test_nonpositive_eta_rejected(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        traj = _frozen(make_field([17]), coeffs)
        with pytest.raises(InvalidParameterError):
            regularized_entropy_residual(traj, coeffs, 0.0, 0.0, SpaceTimeBump(lam=0.1, window=(0.0, 1.0)))

    def test_degenerate_solution_passes(self, make_coeffs, make_field):
        coeffs = make_coeffs(
            state=("positive_part", {"threshold": 0.5}),
            space=("distance_power", {"exponent": 2.0}),
        )
        traj = solve(make_field([129]), coeffs, SolverConfig(T=0.05))
        report = entropy_report(traj)
        assert report.lambda_values == [0.1]
        assert len(report.k_values) == 9
        assert report.passed
        assert report.min_residual >= -report.tolerance
        assert abs(report.sign_collapse_gap) <= report.tolerance
        assert report.eta_convergence[-1] < report.eta_convergence[0]
        assert report.provenance["test_function"] == "interior"

    def test_fine_grid_tolerance_and_eta_convergence(self, make_coeffs, make_field):
        coeffs = make_coeffs(
            state=("positive_part", {"threshold": 0.5}),
            space=("distance_power", {"exponent": 2.0}),
        )
        traj = solve(make_field([257]), coeffs, SolverConfig(T=0.05))
        report = entropy_report(traj)
        assert report.tolerance <= 1e-3
        assert report.passed
        assert report.eta_convergence_monotone
        assert report.eta_values == sorted(report.eta_values, reverse=True)
        assert report.eta_convergence[-1] < report.eta_convergence[0]

    def test_tolerance_halves_with_resolution(self, make_coeffs, make_field):
        coeffs = make_coeffs(
            state=("positive_part", {"threshold": 0.5}),
            space=("distance_power", {"exponent": 2.0}),
        )
        config = SolverConfig(T=0.05)
        tolerances = []
        for n in (129, 257):
            u0 = make_field([n])
            tolerances.append(residual_tolerance(u0.grid, stable_dt(u0, coeffs, config), default_entropy_lambda(u0.grid)))
        assert tolerances[0] / tolerances[1] == pytest.approx(2.0, rel=0.3)

    def test_explicit_sweep_settings(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        traj = solve(make_field([33]), coeffs, SolverConfig(T=0.02))
        settings = VerificationSettings(k_values=[-0.5, 0.5], eta_values=[0.1], lambda_values=[0.2, 0.1])
        report = entropy_report(traj, verification=settings)
        classical = [e for e in report.entries if e.eta is None]
        regularized = [e for e in report.entries if e.eta is not None]
        assert len(classical) == 4
        assert len(regularized) == 4
        assert report.tolerance == pytest.approx(residual_tolerance(traj.grid, traj.dt, 0.1))

    def test_window_outside_run_rejected(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        traj = _frozen(make_field([17]), coeffs)
        with pytest.raises(InvalidParameterError):
            entropy_report(traj, verification=VerificationSettings(time_window=(0.5, 2.0)))


class TestL1Contraction:
    def test_ordered_pair_contracts(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        traj_u, traj_v = _pair(make_field([65]), make_field([65], amplitude=0.5), coeffs,
                               T=0.05, interface="kirchhoff")
        report = l1_contraction_report(traj_u, traj_v)
        assert report.passed
        assert report.nonincreasing
        assert report.final_distance <= report.initial_distance
        assert report.initial_distance == pytest.approx(0.5 * 2 / math.pi, rel=1e-3)

    @pytest.mark.parametrize("counts", [[129], [65, 65]])
    def test_unordered_pair_contracts_under_validated_conditions(self, make_coeffs, make_field, counts):
        domain = DomainSpec(kind="unit_cube", dimension=len(counts))
        coeffs = make_coeffs(domain=domain, state=("power", {"exponent": 2.0}),
                             space=("distance_power", {"exponent": 4.0}))
        assert all(report.passed for report in validate_conditions(coeffs, build_grid(domain, counts)))
        u0 = make_field(counts)
        v0 = make_field(counts, "box")
        assert np.any(u0.values > v0.values) and np.any(u0.values < v0.values)
        traj_u, traj_v = _pair(u0, v0, coeffs, T=0.05, interface="kirchhoff", snapshot_every=1)
        report = l1_contraction_report(traj_u, traj_v)
        assert report.passed
        assert report.nonincreasing
        assert report.ratio <= 1 + 1e-8

    def test_identical_pair(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        traj_u, traj_v = _pair(make_field([33]), make_field([33]), coeffs, T=0.02)
        report = l1_contraction_report(traj_u, traj_v)
        assert all(d == 0.0 for d in report.l1_distances)
        assert report.ratio is None
        assert report.c_fit is None
        assert report.passed

    def test_symmetric(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        traj_u, traj_v = _pair(make_field([33]), make_field([33], "box"), coeffs, T=0.02, interface="kirchhoff")
        forward = l1_contraction_report(traj_u, traj_v)
        backward = l1_contraction_report(traj_v, traj_u)
        assert forward.l1_distances == backward.l1_distances

    def test_reaction_growth_rate(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("constant", {"value": 0.0}), reaction=-1.0)
        traj_u, traj_v = _pair(make_field([17]), make_field([17], amplitude=0.5), coeffs, T=1.0, dt=0.01)
        assert 0.9 <= l1_contraction_report(traj_u, traj_v).c_fit <= 1.1
        assert l1_contraction_report(traj_u, traj_v, c_declared=1.1).passed
        failing = l1_contraction_report(traj_u, traj_v, c_declared=0.0)
        assert not failing.passed
        assert failing.worst_gronwall_violation > 0

    def test_incompatible_grids(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        with pytest.raises(IncompatibleTrajectoriesError):
            l1_contraction_report(_frozen(make_field([17]), coeffs), _frozen(make_field([33]), coeffs))

    def test_incompatible_times(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        u = make_field([17])
        with pytest.raises(IncompatibleTrajectoriesError):
            l1_contraction_report(_frozen(u, coeffs), _frozen(u, coeffs, times=np.linspace(0.0, 1.0, 11)))


class TestComparison:
    def test_identical_solutions_give_zero(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("power", {"exponent": 2.0}))
        traj = solve(make_field([33]), coeffs, SolverConfig(T=0.02))
        assert comparison_functional(traj, traj, coeffs, 0.1) == 0.0

    def test_pure_reaction_balances(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("constant", {"value": 0.0}), reaction=1.0)
        traj_u, traj_v = _pair(make_field([65]), make_field([65], amplitude=0.5), coeffs, T=0.5, dt=1e-3)
        terms = comparison_terms(traj_u, traj_v, coeffs, 0.1)
        total = comparison_functional(traj_u, traj_v, coeffs, 0.1)
        assert terms["reaction"] < 0
        assert abs(total) <= 1e-2 * abs(terms["reaction"])

    def test_boundary_terms_shrink_with_lambda(self, make_coeffs, make_field):
        coeffs = make_coeffs(
            state=("power", {"exponent": 2.0}),
            space=("distance_power", {"exponent": 4.0}),
        )
        traj_u = _frozen(make_field([257], "constant", value=1.0), coeffs)
        traj_v = _frozen(make_field([257], "constant", value=0.5), coeffs)
        report = comparison_report(traj_u, traj_v, coeffs)
        assert [entry.lam for entry in report.entries] == sorted(default_comparison_lambdas(traj_u.grid), reverse=True)
        assert set(report.boundary_decay) == set(BOUNDARY_TERMS)
        assert all(report.boundary_decay.values())

    def test_lambda_at_inradius_rejected(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        traj = _frozen(make_field([17]), coeffs)
        with pytest.raises(InvalidParameterError):
            comparison_functional(traj, traj, coeffs, 0.5)


class TestJumpScan:
    def test_flags_jump_in_degenerate_range(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("abs_excess", {"threshold": 1.0}))
        field_ = make_field([33], "step", left=0.5, right=0.0)
        flags = jump_degeneracy_scan(field_, coeffs)
        assert len(flags) == 1
        assert flags[0].max_a == 0.0
        assert flags[0].jump == pytest.approx(0.5)
        assert flags[0].index == [15]
        assert max_jump(field_) == pytest.approx(0.5)

    def test_jump_with_active_diffusion(self, make_coeffs, make_field):
        coeffs = make_coeffs(state=("abs_excess", {"threshold": 1.0}))
        flags = jump_degeneracy_scan(make_field([33], "step", left=2.0, right=0.0), coeffs)
        assert len(flags) == 1
        assert flags[0].max_a == pytest.approx(1.0)

    def test_smooth_and_flat_fields(self, make_coeffs, make_field):
        coeffs = make_coeffs()
        assert jump_degeneracy_scan(make_field([65]), coeffs) == []
        assert jump_degeneracy_scan(make_field([17], "constant", value=1.0), coeffs) == []
