from itertools import combinations
from typing import List, Union

import numpy as np
from scipy.spatial.distance import pdist

from morphogrid.core.errors import DegenerateConfigurationError
from morphogrid.models.landmarks import LandmarkConfiguration, Point2, SegmentIndex

ShapeLike = Union[LandmarkConfiguration, np.ndarray]


def as_coords(shape: ShapeLike) -> np.ndarray:
    """Coordinates of a configuration or a raw (k, 2) array as a float array."""
    if isinstance(shape, LandmarkConfiguration):
        return shape.coords
    coords = np.asarray(shape, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"expected a (k, 2) coordinate array, got shape {coords.shape}")
    return coords


def centroid(config: ShapeLike) -> Point2:
    return Point2.of(as_coords(config).mean(axis=0))


def centroid_size(config: ShapeLike) -> float:
    coords = as_coords(config)
    size = float(np.sqrt(np.sum((coords - coords.mean(axis=0)) ** 2)))
    if size == 0.0:
        raise DegenerateConfigurationError("all landmarks coincide; centroid size is zero")
    return size


def enumerate_segments(k: int) -> List[SegmentIndex]:
    if k < 2:
        raise ValueError(f"need at least 2 landmarks to form a segment, got {k}")
    return [SegmentIndex(i=i, j=j) for i, j in combinations(range(k), 2)]


def normalize(coords: np.ndarray) -> np.ndarray:
    """Center at the origin and scale to unit centroid size."""
    centered = coords - coords.mean(axis=0)
    return centered / centroid_size(centered)


def diameter(coords: np.ndarray) -> float:
    return float(pdist(np.asarray(coords, dtype=float)).max())


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area; positive for counterclockwise vertex order."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
