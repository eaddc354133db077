"""Polynomial trend-surface regression of target coordinates on template coordinates."""
import math
from typing import Dict

import numpy as np
from loguru import logger

from morphogrid.core.config import CONDITION_WARNING, TREND_TERMS
from morphogrid.core.errors import HomologyError, InsufficientLandmarksError, RankDeficiencyError
from morphogrid.models.landmarks import LandmarkConfiguration, Point2
from morphogrid.models.results import PolynomialTrend, ResidualReport, ResidualRow
from morphogrid.services.geometry import centroid
from morphogrid.services.linalg import qr_least_squares

MONOMIALS = {
    1: ("1", "x", "y"),
    2: ("1", "x", "y", "x^2", "y^2", "xy"),
    3: ("1", "x", "y", "x^2", "y^2", "xy", "x^3", "y^3", "x^2y", "xy^2"),
}


def design_matrix(points, degree: int) -> np.ndarray:
    """Monomial basis in fixed order: 1, x, y, x^2, y^2, xy, x^3, y^3, x^2y, xy^2."""
    xy = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = xy[:, 0], xy[:, 1]
    columns = [np.ones_like(x), x, y]
    if degree >= 2:
        columns += [x * x, y * y, x * y]
    if degree >= 3:
        columns += [x ** 3, y ** 3, x * x * y, x * y * y]
    return np.column_stack(columns)


def required_landmarks(degree: int) -> int:
    if degree not in TREND_TERMS:
        raise ValueError(f"trend degree must be 1, 2 or 3, got {degree}")
    return TREND_TERMS[degree]


def check_landmark_count(k: int, degree: int) -> int:
    terms = required_landmarks(degree)
    if k < terms:
        raise InsufficientLandmarksError(
            f"a degree-{degree} trend fit requires at least {terms} landmarks, got {k}",
            required=terms,
            available=k,
        )
    return terms


def trend_fit(template: LandmarkConfiguration, target: LandmarkConfiguration, degree: int) -> PolynomialTrend:
    k = len(template)
    if len(target) != k:
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} differ in landmark count ({k} vs {len(target)})"
        )
    terms = check_landmark_count(k, degree)

    design = design_matrix(template.coords, degree)
    solution = qr_least_squares(design, target.coords)
    if solution.rank < terms:
        raise RankDeficiencyError(
            f"degree-{degree} design on template {template.name!r} is rank deficient",
            {"rank": solution.rank, "terms": terms, "condition": solution.condition_number},
        )
    if solution.condition_number > CONDITION_WARNING:
        logger.warning(f"Degree-{degree} design is poorly conditioned (condition {solution.condition_number:.3g})")
    else:
        logger.debug(f"Degree-{degree} design condition number {solution.condition_number:.3g}")

    df = k - terms
    if df == 0:
        logger.warning(f"Degree-{degree} fit on {k} landmarks is saturated (df = 0)")
    return PolynomialTrend(
        degree=degree,
        template=template,
        coefficients=solution.coefficients,
        fitted=solution.fitted,
        residuals=solution.residuals,
        df=df,
        condition_number=solution.condition_number,
    )


def trend_transform(trend: PolynomialTrend, points) -> np.ndarray:
    return design_matrix(points, trend.degree) @ trend.coefficients


def trend_eval(trend: PolynomialTrend, p: Point2) -> Point2:
    return Point2.of(trend_transform(trend, [[p.x, p.y]])[0])


def trend_residual_report(trend: PolynomialTrend) -> ResidualReport:
    rows = []
    for label, (dx, dy) in zip(trend.template.labels, trend.residuals):
        rows.append(
            ResidualRow(
                label=label,
                dx=float(dx),
                dy=float(dy),
                magnitude=float(math.hypot(dx, dy)),
                direction=float(math.atan2(dy, dx)),
            )
        )
    rss = np.sum(trend.residuals ** 2, axis=0)
    return ResidualReport(
        degree=trend.degree,
        rows=rows,
        rss=(float(rss[0]), float(rss[1])),
        df=trend.df,
        saturated=trend.df == 0,
    )


def centroid_separation(trend: PolynomialTrend, target: LandmarkConfiguration) -> float:
    """Distance from the observed target centroid to the trend image of the template centroid."""
    observed = centroid(target).as_array()
    predicted = trend_eval(trend, centroid(trend.template)).as_array()
    return float(np.linalg.norm(observed - predicted))


def compare_degrees(template: LandmarkConfiguration, target: LandmarkConfiguration) -> Dict[int, float]:
    """Total residual sum of squares for every degree the landmark count admits."""
    totals = {}
    for degree, terms in TREND_TERMS.items():
        if len(template) >= terms:
            totals[degree] = trend_residual_report(trend_fit(template, target, degree)).total_rss
    return totals
