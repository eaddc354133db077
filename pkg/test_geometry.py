import numpy as np
import pytest
from pydantic import ValidationError

from morphogrid.core.errors import DegenerateConfigurationError, HomologyError, UnknownGroupError
from morphogrid.models.landmarks import Baseline, LandmarkConfiguration, Point2, Sample, SegmentIndex
from morphogrid.services.geometry import (
    centroid,
    centroid_size,
    diameter,
    enumerate_segments,
    normalize,
    polygon_area,
)


class TestPointAndConfiguration:
    def test_point_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            Point2(x=float("nan"), y=0.0)
        with pytest.raises(ValidationError):
            Point2(x=0.0, y=float("inf"))

    def test_configuration_needs_three_unique_landmarks(self):
        with pytest.raises(ValidationError):
            LandmarkConfiguration.from_array("two", [[0, 0], [1, 0]])
        with pytest.raises(ValidationError):
            LandmarkConfiguration.from_array("dup", [[0, 0], [1, 0], [0, 1]], labels=["a", "a", "b"])

    def test_default_labels(self):
        config = LandmarkConfiguration.from_array("c", [[0, 0], [1, 0], [0, 1]])
        assert config.labels == ["L1", "L2", "L3"]

    def test_coordinates_are_copies(self, octagon):
        coords = octagon.coords
        coords[0, 0] = 99.0
        assert octagon.coords[0, 0] == 0.0


class TestSample:
    def test_non_homologous_sample_names_both(self):
        a = LandmarkConfiguration.from_array("young", [[1, 0], [0, 1], [1, 1]])
        b = LandmarkConfiguration.from_array("old", [[0, 0], [1, 0], [0, 1], [1, 1]])
        with pytest.raises(HomologyError) as caught:
            Sample(configurations=[a, b])
        assert "young" in str(caught.value) and "old" in str(caught.value)

    def test_groups_and_selection(self, vilmann_dataset):
        sample = vilmann_dataset.sample
        assert sample.group_names() == ["age7", "age150"]
        assert len(sample.select("age150").configurations) == 4
        with pytest.raises(UnknownGroupError):
            sample.select("adult")

    def test_stacked_shape(self, vilmann_dataset):
        assert vilmann_dataset.sample.stacked().shape == (8, 8, 2)


class TestElementaryOperations:
    def test_centroid_of_square(self):
        square = LandmarkConfiguration.from_array("sq", [[0, 0], [2, 0], [2, 2], [0, 2]])
        assert centroid(square) == Point2(x=1.0, y=1.0)

    def test_centroid_size_of_square(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
        assert centroid_size(square) == pytest.approx(np.sqrt(8.0))

    def test_centroid_size_of_coincident_points(self):
        with pytest.raises(DegenerateConfigurationError):
            centroid_size(np.ones((4, 2)))

    def test_normalize_gives_unit_size(self, octagon):
        unit = normalize(octagon.coords)
        assert np.allclose(unit.mean(axis=0), 0.0, atol=1e-15)
        assert centroid_size(unit) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("k, count", [(3, 3), (8, 28), (20, 190)])
    def test_segment_counts(self, k, count):
        segments = enumerate_segments(k)
        assert len(segments) == count == k * (k - 1) // 2
        assert all(s.i < s.j for s in segments)
        assert segments[0] == SegmentIndex(i=0, j=1)

    def test_segment_ordinals_must_increase(self):
        with pytest.raises(ValidationError):
            SegmentIndex(i=2, j=1)

    def test_baseline_tag_is_one_based(self):
        assert Baseline.of(2, 7).tag() == "3-8"
        with pytest.raises(ValidationError):
            Baseline.of(1, 1)

    def test_polygon_area_sign(self):
        ccw = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        assert polygon_area(ccw) == pytest.approx(1.0)
        assert polygon_area(ccw[::-1]) == pytest.approx(-1.0)

    def test_diameter(self):
        assert diameter(np.array([[0, 0], [3, 4], [1, 1]], dtype=float)) == pytest.approx(5.0)
