"""Thin-plate spline interpolation with kernel U(r) = r^2 log r."""
import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist, pdist

from morphogrid.core.config import COINCIDENT_LANDMARKS
from morphogrid.core.errors import CoincidentLandmarksError, CollinearTemplateError, HomologyError, SingularSystemError
from morphogrid.models.landmarks import LandmarkConfiguration, Point2
from morphogrid.models.results import TpsModel
from morphogrid.services.linalg import lu_solve_checked


def kernel(r: np.ndarray) -> np.ndarray:
    """U(r) = r^2 ln r with U(0) = 0."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        values = 0.5 * r2 * np.log(r2)
    return np.where(r2 > 0.0, values, 0.0)


def _bending_matrix(points: np.ndarray) -> np.ndarray:
    return kernel(cdist(points, points))


def tps_fit(template: LandmarkConfiguration, target: LandmarkConfiguration) -> TpsModel:
    if len(template) != len(target):
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} differ in landmark count ({len(template)} vs {len(target)})"
        )
    p = template.coords
    q = target.coords
    k = len(p)

    closest = float(pdist(p).min())
    if closest <= COINCIDENT_LANDMARKS:
        raise CoincidentLandmarksError(
            f"template {template.name!r} has coincident landmarks", {"min_distance": closest}
        )
    centered = p - p.mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[1] <= 1e-10 * singular[0]:
        raise CollinearTemplateError(f"template {template.name!r} is collinear; spline is undetermined")

    big_k = _bending_matrix(p)
    big_p = np.column_stack([np.ones(k), p])
    system = np.zeros((k + 3, k + 3))
    system[:k, :k] = big_k
    system[:k, k:] = big_p
    system[k:, :k] = big_p.T
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = q

    solution, pivot_ratio = lu_solve_checked(system, rhs)
    if solution is None:
        raise SingularSystemError(
            "thin-plate spline system is singular",
            {"k": k, "pivot_ratio": pivot_ratio, "condition": float(np.linalg.cond(system))},
        )
    weights = solution[:k]
    affine = solution[k:]
    energy = tuple(float(weights[:, c] @ big_k @ weights[:, c]) for c in range(2))
    logger.debug(f"TPS fit over {k} landmarks, bending energy {sum(energy):.6g}, pivot ratio {pivot_ratio:.3g}")
    return TpsModel(template_points=p, weights=weights, affine=affine, energy=energy)


def tps_transform(model: TpsModel, points) -> np.ndarray:
    """Vectorized spline evaluation at an (n, 2) array of points."""
    xy = np.atleast_2d(np.asarray(points, dtype=float))
    basis = kernel(cdist(xy, model.template_points))
    return model.affine[0] + xy @ model.affine[1:] + basis @ model.weights


def tps_eval(model: TpsModel, p: Point2) -> Point2:
    return Point2.of(tps_transform(model, [[p.x, p.y]])[0])


def tps_jacobian(model: TpsModel, p: Point2) -> np.ndarray:
    """Closed-form 2x2 Jacobian d(output)/d(x, y) at ``p``."""
    delta = np.array([p.x, p.y]) - model.template_points
    r2 = np.sum(delta * delta, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(r2 > 0.0, np.log(r2) + 1.0, 0.0)
    # dU/dx = dx (2 ln r + 1), zero at the landmark itself
    gradient = delta * factor[:, None]
    return model.affine[1:].T + model.weights.T @ gradient


def bending_energy(model: TpsModel) -> float:
    return float(model.energy[0] + model.energy[1])
