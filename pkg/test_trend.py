import numpy as np
import pytest

from conftest import random_configuration
from morphogrid.core.errors import InsufficientLandmarksError, RankDeficiencyError
from morphogrid.models.landmarks import LandmarkConfiguration, Point2
from morphogrid.services.registration import affine_fit, apply_affine
from morphogrid.services.trend import (
    centroid_separation,
    compare_degrees,
    design_matrix,
    trend_eval,
    trend_fit,
    trend_residual_report,
)


def normal_equations(design, rhs):
    return np.linalg.solve(design.T @ design, design.T @ rhs)


class TestDesign:
    def test_monomial_order(self):
        row = design_matrix([[2.0, 3.0]], 3)[0]
        assert row.tolist() == [1, 2, 3, 4, 9, 6, 8, 27, 12, 18]

    @pytest.mark.parametrize("degree, terms", [(1, 3), (2, 6), (3, 10)])
    def test_term_counts(self, degree, terms):
        assert design_matrix(np.zeros((4, 2)), degree).shape == (4, terms)


class TestQuadraticRecovery:
    def test_planted_quadratic_on_eight_landmarks(self, rng):
        for _ in range(20):
            template = random_configuration(rng, 8, name="template")
            planted = rng.normal(size=(6, 2))
            target = template.with_coords(design_matrix(template.coords, 2) @ planted, name="target")
            trend = trend_fit(template, target, 2)
            assert np.max(np.abs(trend.coefficients - planted)) < 1e-8
            assert np.max(np.abs(trend.residuals)) < 1e-9
            assert trend.df == 2

    def test_cubic_matches_normal_equations(self, rng):
        template = random_configuration(rng, 20, name="crania")
        target = random_configuration(rng, 20, name="crania_b")
        trend = trend_fit(template, target, 3)
        oracle = normal_equations(design_matrix(template.coords, 3), target.coords)
        assert np.max(np.abs(trend.coefficients - oracle)) < 1e-7
        assert trend.df == 10

    def test_residuals_match_hat_matrix(self, rng):
        template = random_configuration(rng, 9)
        target = random_configuration(rng, 9)
        trend = trend_fit(template, target, 2)
        design = design_matrix(template.coords, 2)
        hat = design @ np.linalg.pinv(design)
        assert np.allclose(trend.residuals, (np.eye(9) - hat) @ target.coords, atol=1e-10)

    def test_linear_trend_is_the_affine_fit(self, rng):
        for _ in range(10):
            template = random_configuration(rng, 8, name="template")
            target = random_configuration(rng, 8, name="target")
            trend = trend_fit(template, target, 1)
            affine = affine_fit(template, target)
            assert np.allclose(trend.coefficients[0], affine.translation, atol=1e-12)
            assert np.allclose(trend.coefficients[1:].T, affine.linear, atol=1e-12)
            assert np.allclose(trend.fitted, apply_affine(affine, template.coords), atol=1e-12)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_residuals_are_orthogonal_to_the_design(self, rng, degree):
        template = random_configuration(rng, 14, name="template")
        target = random_configuration(rng, 14, name="target")
        trend = trend_fit(template, target, degree)
        design = design_matrix(template.coords, degree)
        assert np.max(np.abs(design.T @ trend.residuals)) < 1e-10


class TestNesting:
    def test_higher_degree_never_fits_worse(self, rng):
        for _ in range(100):
            template = random_configuration(rng, 12)
            target = random_configuration(rng, 12)
            rss = compare_degrees(template, target)
            assert rss[3] <= rss[2] + 1e-12
            assert rss[2] <= rss[1] + 1e-12

    def test_compare_degrees_skips_inadmissible(self, octagon, rng):
        target = octagon.with_coords(octagon.coords + rng.normal(scale=0.01, size=(8, 2)))
        assert sorted(compare_degrees(octagon, target)) == [1, 2]


class TestReports:
    def test_saturated_fit(self, rng):
        template = random_configuration(rng, 6)
        report = trend_residual_report(trend_fit(template, random_configuration(rng, 6), 2))
        assert report.df == 0 and report.saturated
        assert report.total_rss < 1e-18

    def test_largest_residual_row(self, octagon):
        coords = octagon.coords.copy()
        coords[3] += [0.0, 0.2]
        report = trend_residual_report(trend_fit(octagon, octagon.with_coords(coords), 1))
        assert report.largest().label == "Lam"
        assert report.rss[0] < report.rss[1]

    def test_trend_eval_and_centroid_separation(self, octagon):
        shifted = octagon.with_coords(octagon.coords + [1.0, 2.0], name="shifted")
        trend = trend_fit(octagon, shifted, 1)
        assert trend_eval(trend, Point2(x=0.0, y=0.0)).as_array() == pytest.approx([1.0, 2.0])
        assert centroid_separation(trend, shifted) < 1e-12


class TestErrors:
    def test_quadratic_needs_six_landmarks(self, rng):
        template = random_configuration(rng, 5)
        with pytest.raises(InsufficientLandmarksError) as caught:
            trend_fit(template, random_configuration(rng, 5), 2)
        assert caught.value.required == 6
        assert "6 landmarks" in str(caught.value)

    def test_cubic_needs_ten_landmarks(self, rng):
        template = random_configuration(rng, 9)
        with pytest.raises(InsufficientLandmarksError) as caught:
            trend_fit(template, random_configuration(rng, 9), 3)
        assert caught.value.required == 10

    def test_conic_template_is_rank_deficient(self):
        angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        circle = LandmarkConfiguration.from_array("circle", np.column_stack([np.cos(angles), np.sin(angles)]))
        with pytest.raises(RankDeficiencyError):
            trend_fit(circle, circle, 2)
