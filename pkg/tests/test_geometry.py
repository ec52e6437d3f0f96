import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenflow.errors import (
    InvalidParameterError,
    InvalidResolutionError,
    NonsmoothPointError,
    OutOfDomainError,
)
from degenflow.models import ConditionId, DomainSpec
from degenflow.utils.geometry import (
    build_grid,
    check_concavity_condition,
    distance_to_boundary,
    inner_normal,
    laplacian_of_distance,
)

UNIT_INTERVAL = DomainSpec(kind="unit_cube", dimension=1)
UNIT_SQUARE = DomainSpec(kind="unit_cube", dimension=2)
UNIT_CUBE_3D = DomainSpec(kind="unit_cube", dimension=3)
DISC = DomainSpec(kind="unit_ball", dimension=2)
BALL_3D = DomainSpec(kind="unit_ball", dimension=3)

coordinate = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, allow_infinity=False)


class TestBuildGrid:
    def test_unit_interval_classification(self):
        grid = build_grid(UNIT_INTERVAL, [5])
        np.testing.assert_allclose(grid.spacing, [0.25])
        assert grid.interior_indices() == [(1,), (2,), (3,)]
        assert grid.boundary_indices() == [(0,), (4,)]

    def test_disc_centre_and_axis_node(self):
        grid = build_grid(DISC, [9, 9])
        assert grid.interior[4, 4]
        assert grid.boundary[8, 4]
        assert not grid.inside[0, 0]

    def test_interval_product_spacing(self):
        domain = DomainSpec(kind="interval_product", dimension=2, bounds=[(0, 1), (0, 2)])
        grid = build_grid(domain, [5, 5])
        np.testing.assert_allclose(grid.spacing, [0.25, 0.5])

    @pytest.mark.parametrize("counts", [[2], [1], [0]])
    def test_too_few_nodes(self, counts):
        with pytest.raises(InvalidResolutionError):
            build_grid(UNIT_INTERVAL, counts)

    def test_count_length_must_match_dimension(self):
        with pytest.raises(InvalidResolutionError):
            build_grid(UNIT_SQUARE, [5])

    @pytest.mark.parametrize("domain,counts", [
        (UNIT_SQUARE, [7, 5]),
        (DISC, [11, 11]),
        (BALL_3D, [9, 9, 9]),
    ])
    def test_classification_is_disjoint_and_exhaustive(self, domain, counts):
        grid = build_grid(domain, counts)
        labels = grid.interior.astype(int) + grid.boundary.astype(int) + grid.outside.astype(int)
        assert np.all(labels == 1)
        assert grid.boundary.any()

    def test_weights_measure_the_domain(self):
        grid = build_grid(UNIT_SQUARE, [11, 21])
        assert grid.weights.sum() == pytest.approx(1.0)


class TestDistance:
    def test_disc_centre(self):
        assert distance_to_boundary(DISC, [0.0, 0.0]) == 1.0

    def test_near_face(self):
        assert distance_to_boundary(UNIT_SQUARE, [0.3, 0.5]) == pytest.approx(0.3)

    @pytest.mark.parametrize("domain,point", [
        (UNIT_SQUARE, [0.0, 0.4]),
        (UNIT_SQUARE, [1.0, 1.0]),
        (DISC, [0.6, 0.8]),
    ])
    def test_zero_on_boundary(self, domain, point):
        assert distance_to_boundary(domain, point) == pytest.approx(0.0, abs=1e-12)

    def test_outside_point(self):
        with pytest.raises(OutOfDomainError):
            distance_to_boundary(UNIT_SQUARE, [1.5, 0.5])

    @given(x=st.tuples(coordinate, coordinate), y=st.tuples(coordinate, coordinate))
    @settings(max_examples=100, deadline=None)
    def test_one_lipschitz(self, x, y):
        gap = abs(distance_to_boundary(UNIT_SQUARE, x) - distance_to_boundary(UNIT_SQUARE, y))
        assert gap <= math.dist(x, y) + 1e-12

    @given(
        radius=st.floats(min_value=0.0, max_value=1.0),
        angle=st.floats(min_value=0.0, max_value=2 * math.pi),
    )
    @settings(max_examples=100, deadline=None)
    def test_disc_distance_plus_radius_is_one(self, radius, angle):
        point = [radius * math.cos(angle), radius * math.sin(angle)]
        assert distance_to_boundary(DISC, point) + math.hypot(*point) == pytest.approx(1.0, abs=1e-12)


class TestLaplacian:
    def test_ball_formula(self):
        assert laplacian_of_distance(BALL_3D, [0.5, 0.0, 0.0]) == pytest.approx(-4.0)

    def test_cube_is_flat(self):
        assert laplacian_of_distance(UNIT_CUBE_3D, [0.1, 0.5, 0.4]) == 0.0

    def test_interval_ball_is_flat(self):
        assert laplacian_of_distance(DomainSpec(kind="unit_ball", dimension=1), [0.3]) == 0.0

    def test_ridge_point_rejected(self):
        with pytest.raises(NonsmoothPointError):
            laplacian_of_distance(UNIT_SQUARE, [0.3, 0.3])

    def test_matches_finite_differences(self):
        point = np.array([0.3, 0.4])
        step = 1e-3
        total = 0.0
        for axis in range(2):
            offset = np.zeros(2)
            offset[axis] = step
            total += (
                distance_to_boundary(DISC, point + offset)
                - 2 * distance_to_boundary(DISC, point)
                + distance_to_boundary(DISC, point - offset)
            ) / step ** 2
        assert laplacian_of_distance(DISC, point) == pytest.approx(total, abs=1e-4)


class TestInnerNormal:
    def test_square_face(self):
        np.testing.assert_allclose(inner_normal(UNIT_SQUARE, [0.0, 0.5]), [1.0, 0.0])

    def test_disc_top(self):
        np.testing.assert_allclose(inner_normal(DISC, [0.0, 1.0]), [0.0, -1.0])

    def test_disc_diagonal(self):
        r = math.sqrt(2) / 2
        np.testing.assert_allclose(inner_normal(DISC, [r, r], tol=1e-9), [-r, -r])

    def test_corner_rejected(self):
        with pytest.raises(NonsmoothPointError):
            inner_normal(UNIT_SQUARE, [0.0, 0.0])

    @given(angle=st.floats(min_value=0.0, max_value=2 * math.pi))
    @settings(max_examples=50, deadline=None)
    def test_points_inward(self, angle):
        p = np.array([math.cos(angle), math.sin(angle)])
        n = inner_normal(DISC, p, tol=1e-9)
        q = p + 1e-3 * n
        assert n @ (q - p) > 0
        assert distance_to_boundary(DISC, q) > 0


class TestConcavity:
    def test_disc_passes(self):
        report = check_concavity_condition(DISC, 0.1, samples=200)
        assert report.condition == ConditionId.C2_7
        assert report.passed
        assert report.worst_violation < 0

    def test_cube_passes_with_equality(self):
        report = check_concavity_condition(UNIT_CUBE_3D, 0.1, samples=200)
        assert report.passed
        assert report.worst_violation == 0.0

    def test_ridge_margin_defaults_to_one_cell(self):
        default = check_concavity_condition(UNIT_CUBE_3D, 0.1, samples=200)
        explicit = check_concavity_condition(UNIT_CUBE_3D, 0.1, samples=200, margin=0.01)
        unguarded = check_concavity_condition(UNIT_CUBE_3D, 0.1, samples=200, margin=0.0)
        assert default == explicit
        assert default.sample_count <= unguarded.sample_count
        assert "ridge margin 0.01" in default.notes

    @pytest.mark.parametrize("band", [0.0, -0.1, 0.5])
    def test_bad_band_rejected(self, band):
        with pytest.raises(InvalidParameterError):
            check_concavity_condition(UNIT_SQUARE, band, samples=10)
