"""Shared fixtures for the morphogrid test suites."""
import numpy as np
import pytest
from loguru import logger

from morphogrid.models.landmarks import LandmarkConfiguration
from morphogrid.services.geometry import rotation_matrix
from morphogrid.services.synthetic import VILMANN_LABELS, VILMANN_OCTAGON, vilmann_analog

collect_ignore = ["examples"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def octagon():
    return LandmarkConfiguration.from_array("octagon", VILMANN_OCTAGON, labels=VILMANN_LABELS)


@pytest.fixture(scope="session")
def vilmann_dataset():
    return vilmann_analog()


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "out").mkdir()
    return tmp_path


@pytest.fixture(autouse=True)
def quiet_logs():
    logger.remove()
    yield
    logger.remove()


def random_configuration(rng, k, name="random", spread=1.0):
    """k landmarks scattered in a square, kept away from one another."""
    while True:
        coords = rng.uniform(-spread, spread, size=(k, 2))
        gaps = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
        gaps[np.diag_indices(k)] = np.inf
        if gaps.min() > 0.02 * spread:
            return LandmarkConfiguration.from_array(name, coords)


def random_similarity(rng, coords):
    angle = rng.uniform(-np.pi, np.pi)
    scale = rng.uniform(0.3, 3.0)
    shift = rng.uniform(-10, 10, size=2)
    return scale * np.asarray(coords) @ rotation_matrix(angle).T + shift
