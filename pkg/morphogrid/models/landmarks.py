import math
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from morphogrid.core.config import DATASET_SCHEMA_VERSION, DEFAULT_GROUP
from morphogrid.core.errors import HomologyError


class CoordinateUnit(str, Enum):
    RAW = "raw"
    TWO_POINT = "two-point"
    PROCRUSTES = "procrustes"


class Point2(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="Horizontal coordinate")
    y: float = Field(..., description="Vertical coordinate")

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coordinates must be finite")
        return value

    @classmethod
    def of(cls, xy: Sequence[float]) -> "Point2":
        return cls(x=float(xy[0]), y=float(xy[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


class Landmark(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str = Field(..., description="Display name of the landmark")
    position: Point2


class LandmarkConfiguration(BaseModel):
    """Ordered landmark list for one specimen or one group mean.

    Homology across configurations is by ordinal position; labels are
    carried for display.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Specimen or group-mean identifier")
    landmarks: List[Landmark] = Field(..., description="Landmarks in homologous order")
    unit: CoordinateUnit = Field(CoordinateUnit.RAW, description="Coordinate standardization")

    @model_validator(mode="after")
    def _check_landmarks(self) -> "LandmarkConfiguration":
        if len(self.landmarks) < 3:
            raise ValueError(f"configuration {self.name!r} needs at least 3 landmarks, got {len(self.landmarks)}")
        labels = [landmark.label for landmark in self.landmarks]
        if len(set(labels)) != len(labels):
            raise ValueError(f"configuration {self.name!r} has duplicate landmark labels")
        return self

    @classmethod
    def from_array(
        cls,
        name: str,
        coords: Any,
        labels: Optional[Sequence[str]] = None,
        unit: CoordinateUnit = CoordinateUnit.RAW,
    ) -> "LandmarkConfiguration":
        xy = np.asarray(coords, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError(f"coordinates for {name!r} must have shape (k, 2), got {xy.shape}")
        if labels is None:
            labels = default_labels(xy.shape[0])
        if len(labels) != xy.shape[0]:
            raise ValueError(f"{len(labels)} labels for {xy.shape[0]} landmarks in {name!r}")
        return cls(
            name=name,
            landmarks=[Landmark(label=label, position=Point2.of(row)) for label, row in zip(labels, xy)],
            unit=unit,
        )

    @property
    def coords(self) -> np.ndarray:
        return np.array([[lm.position.x, lm.position.y] for lm in self.landmarks], dtype=float)

    @property
    def labels(self) -> List[str]:
        return [lm.label for lm in self.landmarks]

    def __len__(self) -> int:
        return len(self.landmarks)

    def with_coords(self, coords: Any, unit: Optional[CoordinateUnit] = None, name: Optional[str] = None) -> "LandmarkConfiguration":
        return LandmarkConfiguration.from_array(
            name or self.name,
            coords,
            labels=self.labels,
            unit=self.unit if unit is None else unit,
        )


def default_labels(k: int) -> List[str]:
    return [f"L{i + 1}" for i in range(k)]


class SegmentIndex(BaseModel):
    model_config = ConfigDict(frozen=True)

    i: int = Field(..., ge=0, description="First landmark ordinal")
    j: int = Field(..., ge=0, description="Second landmark ordinal")

    @model_validator(mode="after")
    def _ordered(self) -> "SegmentIndex":
        if not self.i < self.j:
            raise ValueError(f"segment ordinals must satisfy i < j, got ({self.i}, {self.j})")
        return self

    def as_tuple(self):
        return (self.i, self.j)


class Baseline(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    start: int = Field(..., alias="from", ge=0, description="Landmark sent to (0,0)")
    end: int = Field(..., alias="to", ge=0, description="Landmark sent to (1,0)")

    @model_validator(mode="after")
    def _distinct(self) -> "Baseline":
        if self.start == self.end:
            raise ValueError("baseline endpoints must be different landmarks")
        return self

    @classmethod
    def of(cls, start: int, end: int) -> "Baseline":
        return cls(start=start, end=end)

    def tag(self) -> str:
        """1-based `from-to` tag used in output file names."""
        return f"{self.start + 1}-{self.end + 1}"


class Sample(BaseModel):
    model_config = ConfigDict(frozen=True)

    configurations: List[LandmarkConfiguration] = Field(..., min_length=1)
    groups: Dict[str, str] = Field(
        default_factory=dict, validate_default=True, description="Configuration name to group tag"
    )
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Free-form key/value annotations")

    @field_validator("groups")
    @classmethod
    def _every_configuration_tagged(cls, value: Dict[str, str], info: ValidationInfo) -> Dict[str, str]:
        configurations = info.data.get("configurations")
        if configurations is None:
            return value
        return {config.name: value.get(config.name) or DEFAULT_GROUP for config in configurations}

    @model_validator(mode="after")
    def _homologous(self) -> "Sample":
        first = self.configurations[0]
        names = set()
        for config in self.configurations:
            if config.name in names:
                raise ValueError(f"duplicate configuration name {config.name!r}")
            names.add(config.name)
            if config.labels != first.labels:
                raise HomologyError(
                    f"configuration {config.name!r} is not homologous with {first.name!r}: "
                    f"{len(config)} landmarks {config.labels} vs {len(first)} landmarks {first.labels}"
                )
        return self

    @property
    def labels(self) -> List[str]:
        return self.configurations[0].labels

    @property
    def landmark_count(self) -> int:
        return len(self.configurations[0])

    def group_of(self, name: str) -> str:
        return self.groups.get(name, DEFAULT_GROUP)

    def group_names(self) -> List[str]:
        """Group tags in order of first appearance."""
        seen: List[str] = []
        for config in self.configurations:
            tag = self.group_of(config.name)
            if tag not in seen:
                seen.append(tag)
        return seen

    def select(self, group: str) -> "Sample":
        chosen = [c for c in self.configurations if self.group_of(c.name) == group]
        if not chosen:
            from morphogrid.core.errors import UnknownGroupError

            raise UnknownGroupError(f"no configurations in group {group!r}", {"groups": self.group_names()})
        return Sample(
            configurations=chosen,
            groups={c.name: group for c in chosen},
            metadata=self.metadata,
        )

    def stacked(self) -> np.ndarray:
        return np.stack([config.coords for config in self.configurations])


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    sources: List[str] = Field(default_factory=list)
    ingested_at: Optional[str] = Field(None, description="ISO-8601 UTC timestamp")


class Dataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = Field(DATASET_SCHEMA_VERSION)
    sample: Sample
    provenance: Provenance = Field(default_factory=Provenance)

    @field_validator("schema_version")
    @classmethod
    def _current(cls, value: int) -> int:
        if value != DATASET_SCHEMA_VERSION:
            raise ValueError(f"schema version {value} does not match current version {DATASET_SCHEMA_VERSION}")
        return value
