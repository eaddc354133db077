import time

import numpy as np
import pytest

from conftest import random_configuration
from morphogrid.core.errors import CoincidentLandmarksError, CollinearTemplateError, HomologyError
from morphogrid.models.landmarks import LandmarkConfiguration, Point2
from morphogrid.services.geometry import diameter
from morphogrid.services.gridlab import deform_grid, make_grid
from morphogrid.services.tps import bending_energy, kernel, tps_eval, tps_fit, tps_jacobian, tps_transform


def dense_oracle(p, q):
    """Same linear system assembled independently and solved with numpy."""
    k = len(p)
    r = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        big_k = np.where(r > 0, r ** 2 * np.log(r), 0.0)
    big_p = np.hstack([np.ones((k, 1)), p])
    system = np.block([[big_k, big_p], [big_p.T, np.zeros((3, 3))]])
    rhs = np.vstack([q, np.zeros((3, 2))])
    return np.linalg.solve(system, rhs)


class TestKernel:
    def test_values(self):
        assert kernel(np.array([0.0]))[0] == 0.0
        assert kernel(np.array([1.0]))[0] == pytest.approx(0.0)
        assert kernel(np.array([np.e]))[0] == pytest.approx(np.e ** 2)

    def test_negative_between_zero_and_one(self):
        assert kernel(np.array([0.5]))[0] == pytest.approx(0.25 * np.log(0.5))


class TestInterpolation:
    def test_reproduces_landmarks(self, rng):
        started = time.perf_counter()
        worst = 0.0
        for _ in range(200):
            k = int(rng.integers(4, 26))
            template = random_configuration(rng, k, name="t")
            target = random_configuration(rng, k, name="q")
            model = tps_fit(template, target)
            error = np.max(np.abs(tps_transform(model, template.coords) - target.coords))
            worst = max(worst, error / diameter(target.coords))
        assert worst < 1e-9
        assert time.perf_counter() - started < 5.0

    def test_matches_dense_oracle(self, rng):
        template = random_configuration(rng, 12)
        target = random_configuration(rng, 12)
        model = tps_fit(template, target)
        solution = dense_oracle(template.coords, target.coords)
        assert np.allclose(model.weights, solution[:12], atol=1e-9)
        assert np.allclose(model.affine, solution[12:], atol=1e-9)

    def test_square_to_kite_matches_dense_oracle(self):
        square = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        kite = square.copy()
        kite[2] = [1.5, 1.5]
        template = LandmarkConfiguration.from_array("square", square, labels=list("abcd"))
        target = LandmarkConfiguration.from_array("kite", kite, labels=list("abcd"))
        model = tps_fit(template, target)
        solution = dense_oracle(square, kite)
        assert np.allclose(model.weights, solution[:4], atol=1e-9)
        assert np.allclose(model.affine, solution[4:], atol=1e-9)
        assert np.allclose(model.weights[:, 0], model.weights[:, 1], atol=1e-12)
        assert np.allclose(tps_transform(model, square), kite, atol=1e-12)

    def test_weights_are_orthogonal_to_affine_terms(self, rng):
        template = random_configuration(rng, 9)
        model = tps_fit(template, random_configuration(rng, 9))
        assert np.allclose(model.weights.sum(axis=0), 0.0, atol=1e-9)
        assert np.allclose(template.coords.T @ model.weights, 0.0, atol=1e-9)

    def test_bending_energy_non_negative(self, rng):
        for _ in range(30):
            model = tps_fit(random_configuration(rng, 7), random_configuration(rng, 7))
            assert bending_energy(model) >= 0.0

    def test_eval_agrees_with_transform(self, rng):
        template = random_configuration(rng, 6)
        model = tps_fit(template, random_configuration(rng, 6))
        point = tps_eval(model, Point2(x=0.1, y=-0.2))
        assert np.allclose(point.as_array(), tps_transform(model, [[0.1, -0.2]])[0])


class TestAffinePrecision:
    def test_affine_target_has_zero_energy_and_straight_lines(self, rng):
        for _ in range(20):
            template = random_configuration(rng, 10)
            linear = rng.normal(size=(2, 2)) + 2 * np.eye(2)
            target = template.with_coords(template.coords @ linear.T + rng.normal(size=2), name="affine")
            model = tps_fit(template, target)
            assert bending_energy(model) < 1e-10
            grid = deform_grid(make_grid(template, cells=6), model)
            for line in grid.lines():
                image = line.image
                chord = image[-1] - image[0]
                normal = np.array([-chord[1], chord[0]]) / np.linalg.norm(chord)
                assert np.max(np.abs((image - image[0]) @ normal)) < 1e-9

    def test_identity_is_exact(self, octagon):
        model = tps_fit(octagon, octagon)
        points = np.array([[0.3, 0.2], [5.0, -3.0]])
        assert np.allclose(tps_transform(model, points), points, atol=1e-9)


class TestJacobian:
    def test_matches_finite_differences(self, rng):
        template = random_configuration(rng, 8)
        model = tps_fit(template, random_configuration(rng, 8))
        p = np.array([0.123, -0.321])
        step = 1e-6
        numeric = np.column_stack(
            [
                (tps_transform(model, [p + step * e]) - tps_transform(model, [p - step * e]))[0] / (2 * step)
                for e in np.eye(2)
            ]
        )
        assert np.allclose(tps_jacobian(model, Point2.of(p)), numeric, atol=1e-6)

    def test_matches_finite_differences_everywhere(self, rng):
        template = random_configuration(rng, 8)
        model = tps_fit(template, random_configuration(rng, 8))
        points = rng.uniform(-1.5, 1.5, size=(400, 2))
        gaps = np.linalg.norm(points[:, None, :] - template.coords[None, :, :], axis=-1).min(axis=1)
        points = points[gaps > 0.01][:100]
        assert len(points) == 100
        step = 1e-6
        for p in points:
            numeric = np.column_stack(
                [
                    (tps_transform(model, [p + step * e]) - tps_transform(model, [p - step * e]))[0] / (2 * step)
                    for e in np.eye(2)
                ]
            )
            assert np.allclose(tps_jacobian(model, Point2.of(p)), numeric, atol=1e-6)

    def test_far_field_decays_like_inverse_distance(self, rng):
        template = random_configuration(rng, 8)
        model = tps_fit(template, random_configuration(rng, 8))
        affine = model.affine[1:].T
        center = template.coords.mean(axis=0)
        size = diameter(template.coords)
        direction = np.array([0.6, 0.8])

        def deviation(multiple):
            p = center + multiple * size * direction
            return np.linalg.norm(tps_jacobian(model, Point2.of(p)) - affine)

        near, far = deviation(100.0), deviation(1000.0)
        assert far < near
        assert 5.0 < near / far < 20.0


class TestErrors:
    def test_coincident_landmarks(self):
        template = LandmarkConfiguration.from_array("t", [[0, 0], [0, 0], [1, 0], [0, 1]], labels=list("abcd"))
        target = LandmarkConfiguration.from_array("q", [[0, 0], [1, 1], [1, 0], [0, 1]], labels=list("abcd"))
        with pytest.raises(CoincidentLandmarksError):
            tps_fit(template, target)

    def test_collinear_template(self):
        template = LandmarkConfiguration.from_array("t", [[0, 0], [1, 0], [2, 0], [3, 0]])
        target = LandmarkConfiguration.from_array("q", [[0, 0], [1, 1], [2, 0], [3, 1]])
        with pytest.raises(CollinearTemplateError):
            tps_fit(template, target)

    def test_mismatched_counts(self, octagon):
        with pytest.raises(HomologyError):
            tps_fit(octagon, LandmarkConfiguration.from_array("q", [[0, 0], [1, 0], [0, 1]]))
