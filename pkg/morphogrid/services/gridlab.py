"""Transformation grids: construction, deformation, trimming, extension, and
the segment-rotation analysis of interlandmark networks."""
from functools import singledispatch
from typing import Callable, List, Literal, Optional

import numpy as np
from loguru import logger
from scipy.spatial import ConvexHull

from morphogrid.core.config import BOUNDARY_TOLERANCE, settings
from morphogrid.core.errors import (
    DegenerateConfigurationError,
    DegeneratePolygonError,
    HomologyError,
    RegistrationMismatchError,
    ZeroLengthSegmentError,
)
from morphogrid.models.landmarks import LandmarkConfiguration, Point2, SegmentIndex
from morphogrid.models.results import (
    AffineMap2,
    BilinearMap,
    DeformedGrid,
    GridLine,
    GridSpec,
    Homography,
    PolynomialTrend,
    SegmentRotation,
    SegmentRotationReport,
    TpsModel,
)
from morphogrid.services.geometry import cross2, enumerate_segments, polygon_area
from morphogrid.services.maps import bilinear_transform, homography_transform
from morphogrid.services.registration import apply_affine
from morphogrid.services.tps import tps_transform
from morphogrid.services.trend import trend_transform

PointMap = Callable[[np.ndarray], np.ndarray]
Direction = Literal["left", "right", "up", "down"]


@singledispatch
def to_point_map(mapping) -> PointMap:
    """Uniform (n, 2) -> (n, 2) evaluation over every map family."""
    if callable(mapping):
        return mapping
    raise TypeError(f"no point map for {type(mapping).__name__}")


@to_point_map.register
def _(mapping: TpsModel) -> PointMap:
    return lambda points: tps_transform(mapping, points)


@to_point_map.register
def _(mapping: PolynomialTrend) -> PointMap:
    return lambda points: trend_transform(mapping, points)


@to_point_map.register
def _(mapping: AffineMap2) -> PointMap:
    return lambda points: apply_affine(mapping, points)


@to_point_map.register
def _(mapping: BilinearMap) -> PointMap:
    return lambda points: bilinear_transform(mapping, points)


@to_point_map.register
def _(mapping: Homography) -> PointMap:
    return lambda points: homography_transform(mapping, points)


def make_grid(
    template: LandmarkConfiguration,
    margin: Optional[float] = None,
    cells: Optional[int] = None,
    samples_per_edge: Optional[int] = None,
) -> GridSpec:
    """Square-celled lattice over the template's bounding box grown by ``margin``."""
    margin = settings.grid_margin if margin is None else margin
    cells = settings.grid_cells if cells is None else cells
    samples_per_edge = settings.samples_per_edge if samples_per_edge is None else samples_per_edge
    if margin < 0 or cells < 1:
        raise ValueError(f"margin must be >= 0 and cells >= 1, got margin={margin}, cells={cells}")

    coords = template.coords
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    extent = hi - lo
    if np.any(extent <= 0):
        raise DegenerateConfigurationError(
            f"bounding box of {template.name!r} has zero area", {"extent": extent.tolist()}
        )
    lo = lo - margin * extent
    hi = hi + margin * extent
    extent = hi - lo
    cell = extent.max() / cells
    counts = []
    ranges = []
    for axis in range(2):
        if extent[axis] == extent.max():
            counts.append(cells)
            ranges.append((lo[axis], hi[axis]))
        else:
            n = max(1, int(np.ceil(extent[axis] / cell - 1e-9)))
            middle = 0.5 * (lo[axis] + hi[axis])
            counts.append(n)
            ranges.append((middle - 0.5 * n * cell, middle + 0.5 * n * cell))
    return GridSpec(
        x_range=ranges[0],
        y_range=ranges[1],
        nx=counts[0],
        ny=counts[1],
        samples_per_edge=samples_per_edge,
    )


def extend_grid(spec: GridSpec, direction: Direction, multiples: float) -> GridSpec:
    """Grow one side of the grid by ``multiples`` of its original extent, keeping cell size.

    Extensions add up: two steps of 0.5 reach as far as one step of 1.0.
    """
    if multiples <= 0:
        raise ValueError(f"extension multiples must be positive, got {multiples}")
    if direction not in ("left", "right", "up", "down"):
        raise ValueError(f"unknown extension direction {direction!r}")
    horizontal = direction in ("left", "right")
    base = spec.base_x_range if horizontal else spec.base_y_range
    step = multiples * (base[1] - base[0])
    x_lo, x_hi = spec.x_range
    y_lo, y_hi = spec.y_range
    if direction == "left":
        x_lo -= step
    elif direction == "right":
        x_hi += step
    elif direction == "down":
        y_lo -= step
    else:
        y_hi += step
    return spec.model_copy(update={"x_range": (x_lo, x_hi), "y_range": (y_lo, y_hi)})


def _grid_line(preimage: np.ndarray, point_map: PointMap) -> GridLine:
    with np.errstate(all="ignore"):
        image = np.asarray(point_map(preimage), dtype=float)
    kept = np.all(np.isfinite(image), axis=1)
    return GridLine(preimage=preimage, image=image, kept=kept)


def _sample_lines(lines: np.ndarray, per_edge: int) -> np.ndarray:
    pieces = [np.linspace(a, b, per_edge + 1)[:-1] for a, b in zip(lines[:-1], lines[1:])]
    return np.concatenate(pieces + [lines[-1:]])


def deform_grid(spec: GridSpec, mapping) -> DeformedGrid:
    """Push every lattice line, sampled ``samples_per_edge`` times per cell, through a map."""
    point_map = to_point_map(mapping)
    x_lines, y_lines = spec.x_lines(), spec.y_lines()
    xs = _sample_lines(x_lines, spec.samples_per_edge)
    ys = _sample_lines(y_lines, spec.samples_per_edge)
    verticals = [_grid_line(np.column_stack([np.full_like(ys, x), ys]), point_map) for x in x_lines]
    horizontals = [_grid_line(np.column_stack([xs, np.full_like(xs, y)]), point_map) for y in y_lines]
    return DeformedGrid(spec=spec, verticals=verticals, horizontals=horizontals)


def _check_polygon(polygon) -> np.ndarray:
    vertices = np.asarray(polygon, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
        raise DegeneratePolygonError("polygon needs at least 3 vertices")
    if abs(polygon_area(vertices)) <= 0.0:
        raise DegeneratePolygonError("polygon has zero area")
    return vertices


def points_in_polygon(points, polygon) -> np.ndarray:
    """Even-odd crossing test; points within BOUNDARY_TOLERANCE of an edge count as inside."""
    vertices = _check_polygon(polygon)
    xy = np.atleast_2d(np.asarray(points, dtype=float))
    px = xy[:, 0:1]
    py = xy[:, 1:2]
    start = vertices
    end = np.roll(vertices, -1, axis=0)
    x0, y0 = start[:, 0][None, :], start[:, 1][None, :]
    x1, y1 = end[:, 0][None, :], end[:, 1][None, :]

    straddles = (y0 <= py) != (y1 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing_x = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    crossings = np.sum(straddles & (px < crossing_x), axis=1)
    inside = crossings % 2 == 1

    edge = end - start
    length2 = np.sum(edge * edge, axis=1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((px - x0) * edge[:, 0][None, :] + (py - y0) * edge[:, 1][None, :]) / length2
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    dx = px - (x0 + t * edge[:, 0][None, :])
    dy = py - (y0 + t * edge[:, 1][None, :])
    on_boundary = np.any(np.hypot(dx, dy) <= BOUNDARY_TOLERANCE, axis=1)
    return inside | on_boundary


def point_in_polygon(p: Point2, polygon) -> bool:
    return bool(points_in_polygon([[p.x, p.y]], polygon)[0])


def trim_polygon(config: LandmarkConfiguration, mode: Literal["order", "hull"] = "order") -> np.ndarray:
    """Closed polygon through the landmarks in list order, or their convex hull."""
    coords = config.coords
    if mode == "order":
        return coords
    if mode == "hull":
        return coords[ConvexHull(coords).vertices]
    raise ValueError(f"unknown trim polygon mode {mode!r}")


def trim_grid(
    grid: DeformedGrid,
    polygon,
    against: Literal["template", "target"] = "template",
) -> DeformedGrid:
    """Clear kept flags for samples outside ``polygon``.

    ``template`` tests the lattice preimage, ``target`` the deformed image.
    Image coordinates are never altered.
    """
    vertices = _check_polygon(polygon)

    def trimmed(line: GridLine) -> GridLine:
        tested = line.preimage if against == "template" else line.image
        inside = points_in_polygon(tested, vertices)
        return GridLine(preimage=line.preimage, image=line.image, kept=line.kept & inside)

    if against not in ("template", "target"):
        raise ValueError(f"trim must test 'template' or 'target', got {against!r}")
    return DeformedGrid(
        spec=grid.spec,
        verticals=[trimmed(line) for line in grid.verticals],
        horizontals=[trimmed(line) for line in grid.horizontals],
    )


def kept_fraction(grid: DeformedGrid) -> float:
    flags = np.concatenate([line.kept for line in grid.lines()])
    return float(flags.mean())


def segment_rotations(template: LandmarkConfiguration, target: LandmarkConfiguration) -> SegmentRotationReport:
    """Signed rotation and length ratio of every interlandmark segment.

    Both configurations must already share a registration frame.
    """
    if len(template) != len(target):
        raise HomologyError(
            f"configurations {template.name!r} and {target.name!r} differ in landmark count ({len(template)} vs {len(target)})"
        )
    if template.unit != target.unit:
        raise RegistrationMismatchError(
            f"configurations are in different frames ({template.unit.value} vs {target.unit.value})"
        )
    segments = enumerate_segments(len(template))
    i = np.array([s.i for s in segments])
    j = np.array([s.j for s in segments])
    p, q = template.coords, target.coords
    before = p[j] - p[i]
    after = q[j] - q[i]
    before_length = np.hypot(before[:, 0], before[:, 1])
    after_length = np.hypot(after[:, 0], after[:, 1])
    labels = template.labels
    for index in np.flatnonzero((before_length == 0) | (after_length == 0)):
        pair = (labels[i[index]], labels[j[index]])
        raise ZeroLengthSegmentError(f"segment {pair[0]}-{pair[1]} has zero length", pair=pair)

    rotation = np.arctan2(cross2(before, after), np.sum(before * after, axis=1))
    rotation = np.where(rotation <= -np.pi, np.pi, rotation)
    direction = np.arctan2(before[:, 1], before[:, 0])
    entries = [
        SegmentRotation(
            segment=segment,
            rotation=float(rotation[n]),
            length_ratio=float(after_length[n] / before_length[n]),
            template_direction=float(direction[n]),
        )
        for n, segment in enumerate(segments)
    ]
    return SegmentRotationReport(entries=entries, labels=labels)


def filter_rotations(report: SegmentRotationReport, threshold: Optional[float] = None) -> List[SegmentIndex]:
    """Segments rotating by at least ``threshold`` radians, largest first."""
    threshold = settings.rotation_threshold if threshold is None else threshold
    if threshold < 0:
        raise ValueError(f"rotation threshold must be non-negative, got {threshold}")
    passing = [entry for entry in report.entries if abs(entry.rotation) >= threshold]
    passing.sort(key=lambda entry: -abs(entry.rotation))
    logger.debug(f"{len(passing)} of {len(report.entries)} segments rotate by at least {threshold:.4g} rad")
    return [entry.segment for entry in passing]
