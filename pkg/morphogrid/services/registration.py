from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from morphogrid.core.config import BASELINE_DEGENERACY, PRINCIPAL_AXIS_GAP, settings
from morphogrid.core.errors import (
    BaselineRangeError,
    CollinearTemplateError,
    DegenerateBaselineError,
    HomologyError,
    NonConvergenceError,
    UnknownGroupError,
)
from morphogrid.models.landmarks import Baseline, CoordinateUnit, LandmarkConfiguration, Sample
from morphogrid.models.results import AffineMap2
from morphogrid.services.geometry import as_coords, centroid_size, normalize, rotation_matrix
from morphogrid.services.linalg import qr_least_squares


def _check_homologous(a: LandmarkConfiguration, b: LandmarkConfiguration) -> None:
    if len(a) != len(b):
        raise HomologyError(
            f"configurations {a.name!r} and {b.name!r} differ in landmark count ({len(a)} vs {len(b)})"
        )


def two_point_register(config: LandmarkConfiguration, baseline: Baseline) -> LandmarkConfiguration:
    """Similarity transform sending ``baseline.start`` to (0,0) and ``baseline.end`` to (1,0)."""
    k = len(config)
    if baseline.start >= k or baseline.end >= k:
        raise BaselineRangeError(
            f"baseline ({baseline.start}, {baseline.end}) is out of range for {k} landmarks in {config.name!r}"
        )
    coords = config.coords
    z = coords[:, 0] + 1j * coords[:, 1]
    origin = z[baseline.start]
    span = z[baseline.end] - origin
    if abs(span) <= BASELINE_DEGENERACY * centroid_size(coords):
        raise DegenerateBaselineError(
            f"baseline endpoints coincide in {config.name!r}",
            {"baseline": baseline.tag()},
        )
    w = (z - origin) / span
    w[baseline.start] = 0.0
    w[baseline.end] = 1.0
    registered = np.column_stack([w.real, w.imag])
    return config.with_coords(registered, unit=CoordinateUnit.TWO_POINT)


def procrustes_rotation(config: np.ndarray, reference: np.ndarray) -> float:
    """Closed-form angle rotating centered ``config`` onto centered ``reference``."""
    x, y = config[:, 0], config[:, 1]
    xr, yr = reference[:, 0], reference[:, 1]
    return float(np.arctan2(np.sum(x * yr - y * xr), np.sum(x * xr + y * yr)))


def _align_coords(coords: np.ndarray, reference: np.ndarray) -> np.ndarray:
    unit = normalize(coords)
    angle = procrustes_rotation(unit, reference - reference.mean(axis=0))
    return unit @ rotation_matrix(angle).T


def procrustes_align(config: LandmarkConfiguration, reference: LandmarkConfiguration) -> LandmarkConfiguration:
    """Center, scale to unit centroid size and rotate (never reflect) onto ``reference``."""
    _check_homologous(config, reference)
    reference_coords = reference.coords
    centroid_size(reference_coords)
    aligned = _align_coords(config.coords, reference_coords)
    return config.with_coords(aligned, unit=CoordinateUnit.PROCRUSTES)


def principal_rotation(coords: np.ndarray) -> np.ndarray:
    """Rotation (never a reflection) taking centered ``coords`` onto their principal axes.

    The major axis becomes x, pointing toward the heavier tail of the projections.
    Shapes without a major axis or a tail fall back on their first landmark off the origin.
    """
    values, vectors = np.linalg.eigh(coords.T @ coords)
    if values[1] - values[0] > PRINCIPAL_AXIS_GAP * values[1]:
        axis = vectors[:, 1]
    else:
        first = coords[np.argmax(np.linalg.norm(coords, axis=1) > PRINCIPAL_AXIS_GAP)]
        axis = first / np.linalg.norm(first)
    projections = coords @ axis
    skew = float(np.sum(projections ** 3))
    if abs(skew) > PRINCIPAL_AXIS_GAP:
        axis = axis * np.sign(skew)
    else:
        axis = axis * np.sign(projections[np.argmax(np.abs(projections) > PRINCIPAL_AXIS_GAP)])
    return np.array([[axis[0], -axis[1]], [axis[1], axis[0]]])


def _gpa(stack: np.ndarray, tolerance: float, max_iterations: int):
    mean = normalize(stack[0])
    for iteration in range(1, max_iterations + 1):
        aligned = np.stack([_align_coords(coords, mean) for coords in stack])
        updated = normalize(aligned.mean(axis=0))
        shift = float(np.sqrt(np.mean(np.sum((updated - mean) ** 2, axis=1))))
        mean = updated
        if shift < tolerance:
            frame = principal_rotation(mean)
            return mean @ frame, aligned @ frame, iteration
    raise NonConvergenceError(
        f"generalized Procrustes mean did not converge within {max_iterations} iterations",
        iterations=max_iterations,
    )


def gpa_mean(
    sample: Sample,
    tolerance: Optional[float] = None,
    max_iterations: Optional[int] = None,
    name: str = "gpa_mean",
) -> LandmarkConfiguration:
    """Generalized Procrustes mean, reported on its own principal axes."""
    tolerance = settings.gpa_tolerance if tolerance is None else tolerance
    max_iterations = settings.gpa_max_iterations if max_iterations is None else max_iterations
    mean, _, iterations = _gpa(sample.stacked(), tolerance, max_iterations)
    logger.debug(f"GPA converged after {iterations} iterations over {len(sample.configurations)} configurations")
    return LandmarkConfiguration.from_array(name, mean, labels=sample.labels, unit=CoordinateUnit.PROCRUSTES)


def group_means(sample: Sample, groups: Optional[List[str]] = None) -> Dict[str, LandmarkConfiguration]:
    """Pooled superimposition of the whole sample, then per-group averages in that common frame."""
    groups = groups or sample.group_names()
    stack = sample.stacked()
    _, aligned, iterations = _gpa(stack, settings.gpa_tolerance, settings.gpa_max_iterations)
    logger.info(f"Pooled GPA of {len(stack)} configurations converged in {iterations} iterations")
    means = {}
    for group in groups:
        members = [
            index for index, config in enumerate(sample.configurations) if sample.group_of(config.name) == group
        ]
        if not members:
            raise UnknownGroupError(f"no configurations in group {group!r}", {"groups": sample.group_names()})
        means[group] = LandmarkConfiguration.from_array(
            group, aligned[members].mean(axis=0), labels=sample.labels, unit=CoordinateUnit.PROCRUSTES
        )
    return means


def apply_affine(affine: AffineMap2, points) -> np.ndarray:
    return np.asarray(points, dtype=float) @ affine.linear.T + affine.translation


def invert_affine(affine: AffineMap2) -> AffineMap2:
    inverse = np.linalg.inv(affine.linear)
    return AffineMap2(linear=inverse, translation=-inverse @ affine.translation)


def affine_fit(template: LandmarkConfiguration, target: LandmarkConfiguration) -> AffineMap2:
    """Least-squares affine map from template to target, regressing each coordinate on (1, x, y)."""
    _check_homologous(template, target)
    p = as_coords(template)
    design = np.column_stack([np.ones(len(p)), p])
    solution = qr_least_squares(design, target.coords)
    if solution.rank < 3:
        raise CollinearTemplateError(
            f"template {template.name!r} is collinear; affine fit is undetermined",
            {"rank": solution.rank},
        )
    coefficients = solution.coefficients
    return AffineMap2(linear=coefficients[1:].T, translation=coefficients[0])


def remove_affine(template: LandmarkConfiguration, target: LandmarkConfiguration) -> LandmarkConfiguration:
    """Target with the uniform part of the template-to-target change partialled out."""
    affine = affine_fit(template, target)
    p = template.coords
    adjusted = p + (target.coords - apply_affine(affine, p))
    return target.with_coords(adjusted)
