"""Synthetic landmark data with known answers, for demos and end-to-end checks."""
from typing import List, Tuple

import numpy as np
from loguru import logger

from morphogrid.models.landmarks import Baseline, Dataset, LandmarkConfiguration, Provenance, Sample
from morphogrid.services.geometry import rotation_matrix
from morphogrid.services.registration import two_point_register
from morphogrid.services.trend import design_matrix

VILMANN_LABELS = ["Bas", "Opi", "IPS", "Lam", "Brg", "SES", "ISS", "SOS"]

# midsagittal rat-skull octagon, landmarks in outline order
VILMANN_OCTAGON = np.array(
    [
        [0.00, 0.00],
        [-0.10, 0.35],
        [0.15, 0.75],
        [0.55, 0.95],
        [1.35, 1.00],
        [2.00, 0.45],
        [1.30, 0.15],
        [0.60, 0.05],
    ]
)

VILMANN_BASELINE = Baseline.of(2, 7)

# quadratic growth gradient in the IPS-SOS frame, rows in monomial order 1, x, y, x^2, y^2, xy
PLANTED_GRADIENT = np.array(
    [
        [0.02, -0.01],
        [1.05, 0.03],
        [0.04, 0.97],
        [0.12, -0.05],
        [-0.08, 0.10],
        [0.06, 0.09],
    ]
)

PERTURBATION_SIZE = 0.08
PERTURBATION_DIRECTION = np.array([np.cos(0.7), np.sin(0.7)])


def _similarity_frame(config: LandmarkConfiguration, baseline: Baseline) -> Tuple[np.ndarray, np.ndarray]:
    """Linear part and translation of the two-point registration of ``config``."""
    z = config.coords[:, 0] + 1j * config.coords[:, 1]
    w = 1.0 / (z[baseline.end] - z[baseline.start])
    linear = np.array([[w.real, -w.imag], [w.imag, w.real]])
    shift = -z[baseline.start] * w
    return linear, np.array([shift.real, shift.imag])


def _perturbed_landmark(residual_maker: np.ndarray, preferred: int) -> int:
    """First landmark whose own residual response dominates every other landmark's."""
    diagonal = np.diag(residual_maker)
    for index in [preferred] + list(np.argsort(-diagonal)):
        others = np.delete(np.abs(residual_maker[:, index]), index)
        if diagonal[index] > others.max():
            return int(index)
    return int(np.argmax(diagonal))


def _random_similarities(coords: np.ndarray, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    copies = []
    for _ in range(count):
        angle = rng.uniform(-np.pi, np.pi)
        scale = rng.uniform(0.5, 2.0)
        shift = rng.uniform(-5.0, 5.0, size=2)
        copies.append(scale * coords @ rotation_matrix(angle).T + shift)
    return copies


def vilmann_analog(copies: int = 4, seed: int = 1979) -> Dataset:
    """Two groups ("age7", "age150") of similarity copies of an octagon and its grown form.

    The grown form is an exact quadratic image of the registered octagon
    plus one local displacement orthogonal to the degree-2 design, so a
    degree-2 fit on the IPS-SOS baseline returns the planted coefficients
    and the displaced landmark carries the largest residual.
    """
    rng = np.random.default_rng(seed)
    template = LandmarkConfiguration.from_array("octagon", VILMANN_OCTAGON, labels=VILMANN_LABELS)
    registered = two_point_register(template, VILMANN_BASELINE).coords

    design = design_matrix(registered, 2)
    residual_maker = np.eye(len(registered)) - design @ np.linalg.pinv(design)
    perturbed = _perturbed_landmark(residual_maker, preferred=VILMANN_BASELINE.start)
    bump = residual_maker[:, perturbed] / residual_maker[perturbed, perturbed]
    grown = design @ PLANTED_GRADIENT + PERTURBATION_SIZE * np.outer(bump, PERTURBATION_DIRECTION)

    grown_config = template.with_coords(grown, name="grown")
    linear, shift = _similarity_frame(grown_config, VILMANN_BASELINE)
    planted = PLANTED_GRADIENT @ linear.T
    planted[0] += shift

    configurations = []
    groups = {}
    for group, coords in (("age7", registered), ("age150", grown)):
        for n, copy in enumerate(_random_similarities(coords, copies, rng), start=1):
            name = f"{group}_{n}"
            configurations.append(LandmarkConfiguration.from_array(name, copy, labels=VILMANN_LABELS))
            groups[name] = group

    metadata = {
        "generator": "synthetic-vilmann",
        "seed": seed,
        "baseline": [VILMANN_BASELINE.start + 1, VILMANN_BASELINE.end + 1],
        "trend_degree": 2,
        "planted_coefficients": [[float(a), float(b)] for a, b in planted],
        "perturbed_landmark": VILMANN_LABELS[perturbed],
    }
    logger.info(f"Built synthetic Vilmann analog: {len(configurations)} configurations, perturbation at {VILMANN_LABELS[perturbed]}")
    sample = Sample(configurations=configurations, groups=groups, metadata=metadata)
    return Dataset(sample=sample, provenance=Provenance(sources=["synthetic-vilmann"]))


TWO_BLOCK_LEFT = np.array([[0.0, 0.0], [0.4, 0.1], [0.5, 0.5], [0.1, 0.6], [-0.2, 0.3]])
TWO_BLOCK_RIGHT = np.array([[3.0, 0.2], [3.4, 0.5], [3.1, 0.8]])


def _rotate_about_centroid(coords: np.ndarray, angle: float) -> np.ndarray:
    center = coords.mean(axis=0)
    return (coords - center) @ rotation_matrix(angle).T + center


def two_block_pair(angle: float = 0.2) -> Tuple[LandmarkConfiguration, LandmarkConfiguration]:
    """Five landmarks turning clockwise by ``angle`` and three turning counterclockwise.

    The blocks sit far apart, so segments joining them barely turn.
    """
    template = np.vstack([TWO_BLOCK_LEFT, TWO_BLOCK_RIGHT])
    target = np.vstack(
        [_rotate_about_centroid(TWO_BLOCK_LEFT, -angle), _rotate_about_centroid(TWO_BLOCK_RIGHT, angle)]
    )
    return (
        LandmarkConfiguration.from_array("two_block_template", template),
        LandmarkConfiguration.from_array("two_block_target", target),
    )
