from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from morphogrid.core.config import settings

XY = Tuple[float, float]


class LineWeight(str, Enum):
    LIGHT = "light"
    HEAVY = "heavy"


class Polyline(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["polyline"] = "polyline"
    points: List[XY] = Field(..., min_length=2)
    weight: LineWeight = LineWeight.LIGHT
    closed: bool = False


class Marker(BaseModel):
    """Circle at a landmark; pixel radius unless ``world_radius`` is given."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["marker"] = "marker"
    center: XY
    filled: bool = True
    scale: float = Field(1.0, gt=0, description="Multiplier on the style's marker radius")
    world_radius: Optional[float] = Field(None, gt=0)


class Label(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["label"] = "label"
    position: XY
    text: str
    offset: XY = (4.0, -4.0)


class SegmentNetwork(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["network"] = "network"
    points: List[XY]
    segments: List[Tuple[int, int]]
    weight: LineWeight = LineWeight.LIGHT


Primitive = Annotated[Union[Polyline, Marker, Label, SegmentNetwork], Field(discriminator="kind")]


class Style(BaseModel):
    model_config = ConfigDict(frozen=True)

    light_stroke: float = Field(default_factory=lambda: settings.light_stroke)
    heavy_stroke: float = Field(default_factory=lambda: settings.heavy_stroke)
    marker_radius: float = Field(default_factory=lambda: settings.marker_radius)
    color: str = "#000000"
    font_size: float = 10.0


class Viewport(BaseModel):
    """World rectangle shown isotropically in a pixel rectangle, y axis pointing up."""

    model_config = ConfigDict(frozen=True)

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    width: float = Field(default_factory=lambda: float(settings.panel_size), gt=0)
    height: float = Field(default_factory=lambda: float(settings.panel_size), gt=0)


class Panel(BaseModel):
    model_config = ConfigDict(frozen=True)

    scene: "Scene"
    x: float = Field(..., description="Pixel offset of the panel's left edge")
    y: float = Field(..., description="Pixel offset of the panel's top edge")


class Scene(BaseModel):
    model_config = ConfigDict(frozen=True)

    viewport: Viewport
    layers: List[Primitive] = Field(default_factory=list)
    panels: List[Panel] = Field(default_factory=list)
    style: Style = Field(default_factory=Style)
    title: Optional[str] = None


Panel.model_rebuild()
