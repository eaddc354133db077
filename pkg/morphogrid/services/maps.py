"""Analytic quad-to-quad maps and the square prototypes used for interpretation."""
from typing import Tuple

import numpy as np
from loguru import logger

from morphogrid.core.config import DETERMINANT_FLOOR, UNIT_BOX_TOLERANCE, VANISHING_LINE, settings
from morphogrid.core.errors import (
    DegenerateQuadError,
    NonConvexQuadError,
    OutsideDomainError,
    SingularSystemError,
    VanishingLineError,
)
from morphogrid.models.landmarks import LandmarkConfiguration, Point2
from morphogrid.models.results import BilinearMap, Homography, PrototypeKind, Quad
from morphogrid.services.geometry import cross2, rotation_matrix
from morphogrid.services.linalg import lu_solve_checked

SQUARE_LABELS = ["A", "B", "C", "D"]


def quad_from_configuration(config: LandmarkConfiguration) -> Quad:
    if len(config) != 4:
        raise DegenerateQuadError(f"a quad needs exactly 4 landmarks, {config.name!r} has {len(config)}")
    return Quad.of(config.coords)


def is_convex(quad: Quad) -> bool:
    corners = quad.corners
    edges = np.roll(corners, -1, axis=0) - corners
    turns = cross2(edges, np.roll(edges, -1, axis=0))
    return bool(np.all(turns > 0) or np.all(turns < 0))


def bilinear_forward(quad: Quad, u, v) -> np.ndarray:
    a, b, c, d = quad.corners
    u = np.asarray(u, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)[..., None]
    return (1 - u) * (1 - v) * a + u * (1 - v) * b + u * v * c + (1 - u) * v * d


def bilinear_inverse(quad: Quad, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u, v) in the unit box for each point, NaN where none exists.

    Returns ``(u, v, ambiguous)``; ``ambiguous`` marks points for which
    both roots of the quadratic fall in the box, where the smaller u wins.
    """
    if not is_convex(quad):
        raise NonConvexQuadError("bilinear source quad must be convex")
    xy = np.atleast_2d(np.asarray(points, dtype=float))
    a, b, c, d = quad.corners
    e = b - a
    f = d - a
    g = a - b + c - d
    h = xy - a

    k2 = float(cross2(g, f))
    k1 = cross2(e, f) + cross2(h, g)
    k0 = cross2(h, e)

    scale = float(np.abs(cross2(e, f))) or 1.0
    candidates = []
    if abs(k2) <= 1e-14 * scale:
        with np.errstate(divide="ignore", invalid="ignore"):
            candidates.append(-k0 / k1)
    else:
        disc = k1 * k1 - 4.0 * k2 * k0
        disc = np.where((disc < 0) & (disc > -1e-14 * scale * scale), 0.0, disc)
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        q = -0.5 * (k1 + np.where(k1 >= 0, 1.0, -1.0) * root)
        with np.errstate(divide="ignore", invalid="ignore"):
            candidates.append(q / k2)
            candidates.append(np.where(q != 0, k0 / q, np.nan))

    solutions = []
    for v in candidates:
        axis = e + v[:, None] * g
        norm2 = np.sum(axis * axis, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.sum((h - v[:, None] * f) * axis, axis=1) / norm2
        lo, hi = -UNIT_BOX_TOLERANCE, 1.0 + UNIT_BOX_TOLERANCE
        valid = np.isfinite(u) & np.isfinite(v) & (u >= lo) & (u <= hi) & (v >= lo) & (v <= hi)
        solutions.append((np.clip(u, 0.0, 1.0), np.clip(v, 0.0, 1.0), valid))

    u_out = np.full(len(xy), np.nan)
    v_out = np.full(len(xy), np.nan)
    ambiguous = np.zeros(len(xy), dtype=bool)
    for u, v, valid in solutions:
        take = valid & (np.isnan(u_out) | (u < u_out))
        ambiguous |= valid & ~np.isnan(u_out) & (np.abs(u - u_out) > UNIT_BOX_TOLERANCE)
        u_out = np.where(take, u, u_out)
        v_out = np.where(take, v, v_out)
    if ambiguous.any():
        logger.debug(f"Bilinear inversion had two admissible roots at {int(ambiguous.sum())} points")
    return u_out, v_out, ambiguous


def bilinear_transform(bilinear: BilinearMap, points) -> np.ndarray:
    u, v, _ = bilinear_inverse(bilinear.src, points)
    return bilinear_forward(bilinear.dst, u, v)


def bilinear_eval(src: Quad, dst: Quad, p: Point2) -> Point2:
    u, v, _ = bilinear_inverse(src, [[p.x, p.y]])
    if np.isnan(u[0]):
        raise OutsideDomainError(f"point ({p.x}, {p.y}) lies outside the source quad")
    return Point2.of(bilinear_forward(dst, u[0], v[0]))


def _has_collinear_triple(corners: np.ndarray) -> bool:
    scale = float(np.ptp(corners, axis=0).max()) ** 2 or 1.0
    for skip in range(4):
        p, q, r = [corners[i] for i in range(4) if i != skip]
        if abs(cross2(q - p, r - p)) <= 1e-12 * scale:
            return True
    return False


def homography_from_quads(src: Quad, dst: Quad) -> Homography:
    """Projective map sending the four source corners onto the four target corners."""
    if _has_collinear_triple(src.corners) or _has_collinear_triple(dst.corners):
        raise DegenerateQuadError("three corners of a quad are collinear; projective map is undetermined")
    system = np.zeros((8, 8))
    rhs = np.zeros(8)
    for row, ((x, y), (u, v)) in enumerate(zip(src.corners, dst.corners)):
        system[2 * row] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        system[2 * row + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * row] = u
        rhs[2 * row + 1] = v
    solution, pivot_ratio = lu_solve_checked(system, rhs)
    if solution is None:
        raise SingularSystemError("projective corner system is singular", {"pivot_ratio": pivot_ratio})
    matrix = np.append(solution, 1.0).reshape(3, 3)
    if abs(np.linalg.det(matrix)) <= DETERMINANT_FLOOR:
        raise SingularSystemError("projective map is not invertible", {"det": float(np.linalg.det(matrix))})
    return Homography(matrix=matrix)


def homography_transform(homography: Homography, points) -> np.ndarray:
    """Projective application with perspective divide; NaN on the vanishing line."""
    xy = np.atleast_2d(np.asarray(points, dtype=float))
    homogeneous = np.column_stack([xy, np.ones(len(xy))]) @ homography.matrix.T
    w = homogeneous[:, 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        mapped = homogeneous[:, :2] / w
    return np.where(np.abs(w) > VANISHING_LINE, mapped, np.nan)


def homography_eval(homography: Homography, p: Point2) -> Point2:
    mapped = homography_transform(homography, [[p.x, p.y]])[0]
    if not np.all(np.isfinite(mapped)):
        raise VanishingLineError(f"point ({p.x}, {p.y}) lies on the vanishing line of the projective map")
    return Point2.of(mapped)


def compose_homographies(first: Homography, second: Homography) -> Homography:
    """Apply ``first`` then ``second``."""
    return Homography(matrix=second.matrix @ first.matrix)


def _square(rotated: bool) -> np.ndarray:
    square = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    if rotated:
        square = square @ rotation_matrix(np.pi / 4).T
    return square


def prototype_pair(kind: PrototypeKind, parameter: float = None) -> Tuple[LandmarkConfiguration, LandmarkConfiguration]:
    """Square template and its sheared, tapered or bent partner.

    Parallelogram and trapezoid use the axis-aligned square; the rotated
    parallelogram and the kite use the same square turned by 45 degrees.
    """
    kind = PrototypeKind(kind)
    t = settings.prototype_parameter if parameter is None else parameter
    rotated = kind in (PrototypeKind.ROTATED_PARALLELOGRAM, PrototypeKind.KITE)
    square = _square(rotated)

    if kind in (PrototypeKind.PARALLELOGRAM, PrototypeKind.ROTATED_PARALLELOGRAM):
        target = square @ np.array([[1.0, t], [0.0, 1.0]]).T
    elif kind is PrototypeKind.TRAPEZOID:
        # legs keep the square's edge length 2
        half_height = np.sqrt(1.0 - t * t)
        target = np.array(
            [
                [-(1.0 + t), -half_height],
                [1.0 + t, -half_height],
                [1.0 - t, half_height],
                [-(1.0 - t), half_height],
            ]
        )
    else:
        # slide the horizontal diagonal up along the vertical one
        target = square.copy()
        horizontal = np.abs(square[:, 1]) < 1e-12
        target[horizontal, 1] += t * np.sqrt(2.0)

    template = LandmarkConfiguration.from_array(f"{kind.value}_template", square, labels=SQUARE_LABELS)
    partner = LandmarkConfiguration.from_array(f"{kind.value}_target", target, labels=SQUARE_LABELS)
    return template, partner
