from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from morphogrid.models.landmarks import LandmarkConfiguration, Point2, SegmentIndex


def _frozen_array(value, shape: Optional[Tuple[Optional[int], ...]] = None, finite: bool = True) -> np.ndarray:
    array = np.array(value, dtype=float)
    if shape is not None:
        if array.ndim != len(shape) or any(s is not None and s != n for s, n in zip(shape, array.shape)):
            raise ValueError(f"expected array of shape {shape}, got {array.shape}")
    if finite and not np.all(np.isfinite(array)):
        raise ValueError("array entries must be finite")
    array.setflags(write=False)
    return array


class ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class AffineMap2(ArrayModel):
    """x -> linear @ x + translation."""

    linear: np.ndarray = Field(..., description="2x2 linear part")
    translation: np.ndarray = Field(..., description="Translation vector")

    @field_validator("linear")
    @classmethod
    def _linear(cls, value):
        return _frozen_array(value, (2, 2))

    @field_validator("translation")
    @classmethod
    def _translation(cls, value):
        return _frozen_array(value, (2,))

    @classmethod
    def identity(cls) -> "AffineMap2":
        return cls(linear=np.eye(2), translation=np.zeros(2))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    @property
    def offset(self) -> Point2:
        return Point2.of(self.translation)


class TpsModel(ArrayModel):
    template_points: np.ndarray = Field(..., description="k x 2 template landmarks")
    weights: np.ndarray = Field(..., description="k x 2 warp weights")
    affine: np.ndarray = Field(..., description="3 x 2 affine coefficients, rows (constant, x, y)")
    energy: Tuple[float, float] = Field(..., description="Bending energy w'Kw per output coordinate")

    @field_validator("template_points", "weights")
    @classmethod
    def _kx2(cls, value):
        return _frozen_array(value, (None, 2))

    @field_validator("affine")
    @classmethod
    def _affine(cls, value):
        return _frozen_array(value, (3, 2))

    @field_validator("energy")
    @classmethod
    def _energy(cls, value):
        if min(value) < -1e-12:
            raise ValueError(f"bending energy must be non-negative, got {value}")
        return (max(float(value[0]), 0.0), max(float(value[1]), 0.0))


class PolynomialTrend(ArrayModel):
    """Least-squares polynomial regression of target on template coordinates."""

    degree: int = Field(..., ge=1, le=3)
    template: LandmarkConfiguration
    coefficients: np.ndarray = Field(..., description="m x 2 coefficients in monomial-basis order")
    fitted: np.ndarray = Field(..., description="k x 2 fitted target positions")
    residuals: np.ndarray = Field(..., description="k x 2 target minus fitted")
    df: int = Field(..., ge=0, description="Residual degrees of freedom per coordinate")
    condition_number: float = Field(..., description="2-norm condition number of the design matrix")

    @field_validator("coefficients", "fitted", "residuals")
    @classmethod
    def _kx2(cls, value):
        return _frozen_array(value, (None, 2))

    @property
    def fitted_points(self) -> List[Point2]:
        return [Point2.of(row) for row in self.fitted]

    @property
    def residual_points(self) -> List[Point2]:
        return [Point2.of(row) for row in self.residuals]


class ResidualRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    dx: float
    dy: float
    magnitude: float
    direction: float = Field(..., description="Residual direction in radians, counterclockwise from +x")


class ResidualReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    degree: int
    rows: List[ResidualRow]
    rss: Tuple[float, float] = Field(..., description="Residual sum of squares per coordinate")
    df: int
    saturated: bool = Field(..., description="True when df = 0 and the fit interpolates")

    @property
    def total_rss(self) -> float:
        return self.rss[0] + self.rss[1]

    def largest(self) -> ResidualRow:
        return max(self.rows, key=lambda row: row.magnitude)


class Quad(ArrayModel):
    """Four corners in cyclic order A, B, C, D."""

    corners: np.ndarray = Field(..., description="4 x 2 corner coordinates")

    @field_validator("corners")
    @classmethod
    def _corners(cls, value):
        array = _frozen_array(value, (4, 2))
        for a in range(4):
            for b in range(a + 1, 4):
                if np.allclose(array[a], array[b], rtol=0.0, atol=1e-12):
                    raise ValueError(f"quad corners {a} and {b} coincide")
        if _segments_cross(array[0], array[1], array[2], array[3]) or _segments_cross(array[1], array[2], array[3], array[0]):
            raise ValueError("quad is self-intersecting")
        return array

    @classmethod
    def of(cls, points) -> "Quad":
        return cls(corners=np.asarray(points, dtype=float))


def _cross(o, a, b) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _segments_cross(p1, p2, q1, q2) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


class Homography(ArrayModel):
    matrix: np.ndarray = Field(..., description="3x3 projective matrix, bottom-right 1 when nonzero")

    @field_validator("matrix")
    @classmethod
    def _matrix(cls, value):
        array = np.array(value, dtype=float)
        if array.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {array.shape}")
        if abs(array[2, 2]) > 1e-15:
            array = array / array[2, 2]
        if abs(np.linalg.det(array)) <= 1e-12:
            raise ValueError("homography is singular")
        return _frozen_array(array, (3, 3))


class BilinearMap(ArrayModel):
    src: Quad
    dst: Quad


class GridSpec(BaseModel):
    """A lattice of ``nx`` by ``ny`` cells over ``base_x_range`` x ``base_y_range``,
    drawn over ``x_range`` x ``y_range``.

    The drawn ranges start out equal to the base ranges and only grow through
    extension; lattice lines keep the base cell size, and a drawn edge that
    falls between lattice lines gets its own boundary line.
    """

    model_config = ConfigDict(frozen=True)

    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    nx: int = Field(..., ge=1, description="Cell count along x of the base lattice")
    ny: int = Field(..., ge=1, description="Cell count along y of the base lattice")
    samples_per_edge: int = Field(10, ge=2)
    base_x_range: Optional[Tuple[float, float]] = None
    base_y_range: Optional[Tuple[float, float]] = None

    @model_validator(mode="before")
    @classmethod
    def _default_base(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            for axis in ("x", "y"):
                if data.get(f"base_{axis}_range") is None and data.get(f"{axis}_range") is not None:
                    data[f"base_{axis}_range"] = data.get(f"{axis}_range")
        return data

    @field_validator("x_range", "y_range", "base_x_range", "base_y_range")
    @classmethod
    def _interval(cls, value):
        lo, hi = float(value[0]), float(value[1])
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise ValueError(f"range must be a non-empty finite interval, got {value}")
        return (lo, hi)

    @model_validator(mode="after")
    def _covers_base(self):
        for drawn, base in ((self.x_range, self.base_x_range), (self.y_range, self.base_y_range)):
            if drawn[0] > base[0] or drawn[1] < base[1]:
                raise ValueError(f"drawn range {drawn} must contain the base range {base}")
        return self

    @property
    def cell_width(self) -> float:
        return (self.base_x_range[1] - self.base_x_range[0]) / self.nx

    @property
    def cell_height(self) -> float:
        return (self.base_y_range[1] - self.base_y_range[0]) / self.ny

    def x_lines(self) -> np.ndarray:
        return _lattice(self.x_range, self.base_x_range[0], self.cell_width)

    def y_lines(self) -> np.ndarray:
        return _lattice(self.y_range, self.base_y_range[0], self.cell_height)


def _lattice(drawn: Tuple[float, float], origin: float, cell: float) -> np.ndarray:
    lo, hi = drawn
    slack = 1e-9
    first = int(np.ceil((lo - origin) / cell - slack))
    last = int(np.floor((hi - origin) / cell + slack))
    inner = origin + cell * np.arange(first, last + 1)
    inner = inner[(inner > lo + slack * cell) & (inner < hi - slack * cell)]
    return np.concatenate([[lo], inner, [hi]])


class GridLine(ArrayModel):
    preimage: np.ndarray = Field(..., description="n x 2 template-space samples")
    image: np.ndarray = Field(..., description="n x 2 mapped samples, NaN where the map failed")
    kept: np.ndarray = Field(..., description="n booleans")

    @field_validator("preimage")
    @classmethod
    def _preimage(cls, value):
        return _frozen_array(value, (None, 2))

    @field_validator("image")
    @classmethod
    def _image(cls, value):
        return _frozen_array(value, (None, 2), finite=False)

    @field_validator("kept")
    @classmethod
    def _kept(cls, value):
        array = np.array(value, dtype=bool)
        array.setflags(write=False)
        return array

    def runs(self) -> List[np.ndarray]:
        """Image polylines split at kept/not-kept transitions."""
        pieces = []
        start = None
        for index, flag in enumerate(self.kept):
            if flag and start is None:
                start = index
            elif not flag and start is not None:
                if index - start >= 2:
                    pieces.append(self.image[start:index])
                start = None
        if start is not None and len(self.kept) - start >= 2:
            pieces.append(self.image[start:])
        return pieces


class DeformedGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec: GridSpec
    verticals: List[GridLine] = Field(..., description="Initially vertical lines, left to right")
    horizontals: List[GridLine] = Field(..., description="Initially horizontal lines, bottom to top")

    def lines(self) -> List[GridLine]:
        return list(self.verticals) + list(self.horizontals)


class SegmentRotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    segment: SegmentIndex
    rotation: float = Field(..., description="Signed rotation in radians, (-pi, pi]")
    length_ratio: float = Field(..., gt=0)
    template_direction: float = Field(..., description="Template segment direction in radians")


class SegmentRotationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: List[SegmentRotation]
    labels: List[str]
    convention: str = "counterclockwise-positive"

    def by_segment(self) -> Dict[Tuple[int, int], SegmentRotation]:
        return {entry.segment.as_tuple(): entry for entry in self.entries}


class PrototypeKind(str, Enum):
    PARALLELOGRAM = "parallelogram"
    ROTATED_PARALLELOGRAM = "rotated_parallelogram"
    TRAPEZOID = "trapezoid"
    KITE = "kite"
