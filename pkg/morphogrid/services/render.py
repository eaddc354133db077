"""Deterministic SVG output for grids, segment networks and panel layouts."""
import math
from typing import Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from morphogrid.core.config import settings
from morphogrid.core.errors import DegenerateViewportError
from morphogrid.models.landmarks import Baseline, LandmarkConfiguration
from morphogrid.models.results import DeformedGrid
from morphogrid.models.scene import (
    Label,
    LineWeight,
    Marker,
    Panel,
    Polyline,
    Scene,
    SegmentNetwork,
    Style,
    Viewport,
)

SVG_HEADER = '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'


def fmt(value: float, digits: Optional[int] = None) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot render non-finite coordinate {value}")
    text = format(value, f".{digits or settings.svg_digits}g")
    return "0" if text in ("-0", "0") else text


class _Projection:
    """World-to-pixel map with one scale factor for both axes and y flipped."""

    def __init__(self, viewport: Viewport):
        span_x = viewport.x_max - viewport.x_min
        span_y = viewport.y_max - viewport.y_min
        if not (span_x > 0 and span_y > 0 and math.isfinite(span_x) and math.isfinite(span_y)):
            raise DegenerateViewportError(
                "viewport has zero or non-finite extent",
                {"x": (viewport.x_min, viewport.x_max), "y": (viewport.y_min, viewport.y_max)},
            )
        self.scale = min(viewport.width / span_x, viewport.height / span_y)
        self.left = (viewport.width - self.scale * span_x) / 2.0 - self.scale * viewport.x_min
        self.top = (viewport.height - self.scale * span_y) / 2.0 + self.scale * viewport.y_max

    def __call__(self, point: Sequence[float]) -> Tuple[float, float]:
        return self.left + self.scale * point[0], self.top - self.scale * point[1]


def _stroke(style: Style, weight: LineWeight) -> str:
    width = style.heavy_stroke if weight is LineWeight.HEAVY else style.light_stroke
    return f'fill="none" stroke="{style.color}" stroke-width="{fmt(width)}" class="{weight.value}"'


def _line(a, b, attributes: str) -> str:
    return f'<line x1="{fmt(a[0])}" y1="{fmt(a[1])}" x2="{fmt(b[0])}" y2="{fmt(b[1])}" {attributes}/>'


def _scene_elements(scene: Scene) -> List[str]:
    project = _Projection(scene.viewport)
    style = scene.style
    out: List[str] = []
    if scene.title:
        out.append(
            f'<text x="{fmt(scene.viewport.width / 2)}" y="{fmt(style.font_size * 1.5)}" '
            f'font-size="{fmt(style.font_size)}" font-family="sans-serif" text-anchor="middle">'
            f"{escape(scene.title)}</text>"
        )
    for item in scene.layers:
        if isinstance(item, Polyline):
            pixels = [project(p) for p in item.points]
            attributes = _stroke(style, item.weight)
            if len(pixels) == 2 and not item.closed:
                out.append(_line(pixels[0], pixels[1], attributes))
            else:
                tag = "polygon" if item.closed else "polyline"
                coords = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in pixels)
                out.append(f'<{tag} points="{coords}" {attributes}/>')
        elif isinstance(item, SegmentNetwork):
            attributes = _stroke(style, item.weight)
            for i, j in item.segments:
                out.append(_line(project(item.points[i]), project(item.points[j]), attributes))
        elif isinstance(item, Marker):
            cx, cy = project(item.center)
            if item.world_radius is not None:
                radius = item.world_radius * project.scale
            else:
                radius = style.marker_radius * item.scale
            fill = style.color if item.filled else "none"
            out.append(
                f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(radius)}" fill="{fill}" '
                f'stroke="{style.color}" stroke-width="{fmt(style.light_stroke)}"/>'
            )
        elif isinstance(item, Label):
            x, y = project(item.position)
            out.append(
                f'<text x="{fmt(x + item.offset[0])}" y="{fmt(y + item.offset[1])}" '
                f'font-size="{fmt(style.font_size)}" font-family="sans-serif">{escape(item.text)}</text>'
            )
    for panel in scene.panels:
        out.append(f'<g transform="translate({fmt(panel.x)},{fmt(panel.y)})">')
        out.append(
            f'<rect x="0" y="0" width="{fmt(panel.scene.viewport.width)}" '
            f'height="{fmt(panel.scene.viewport.height)}" fill="none" stroke="#cccccc" stroke-width="0.5"/>'
        )
        out.extend(_scene_elements(panel.scene))
        out.append("</g>")
    return out


def render_scene(scene: Scene) -> str:
    width = fmt(scene.viewport.width)
    height = fmt(scene.viewport.height)
    body = _scene_elements(scene)
    root = (
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width={quoteattr(width)} '
        f'height={quoteattr(height)} viewBox="0 0 {width} {height}"'
    )
    if not body:
        return SVG_HEADER + root + "/>\n"
    return SVG_HEADER + root + ">\n" + "\n".join(body) + "\n</svg>\n"


def fit_viewport(points: Iterable[Sequence[float]], pad: float = 0.06, width: float = None, height: float = None) -> Viewport:
    """Viewport around finite points with fractional padding."""
    xy = np.asarray([p for p in points], dtype=float).reshape(-1, 2)
    xy = xy[np.all(np.isfinite(xy), axis=1)]
    if len(xy) == 0:
        raise DegenerateViewportError("no finite points to frame")
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = max(float((hi - lo).max()), 1e-9)
    margin = pad * span
    size = float(settings.panel_size)
    return Viewport(
        x_min=float(lo[0] - margin),
        x_max=float(max(hi[0], lo[0] + 1e-9) + margin),
        y_min=float(lo[1] - margin),
        y_max=float(max(hi[1], lo[1] + 1e-9) + margin),
        width=width or size,
        height=height or size,
    )


def grid_points(grid: DeformedGrid) -> np.ndarray:
    runs = [run for line in grid.lines() for run in line.runs()]
    if not runs:
        return np.empty((0, 2))
    return np.concatenate(runs)


def grid_layers(grid: DeformedGrid) -> List[Polyline]:
    return [
        Polyline(points=[(float(x), float(y)) for x, y in run], weight=LineWeight.LIGHT)
        for line in grid.lines()
        for run in line.runs()
    ]


def landmark_markers(config: LandmarkConfiguration, filled: bool, baseline: Optional[Baseline] = None) -> List[Marker]:
    ends = {baseline.start, baseline.end} if baseline is not None else set()
    return [
        Marker(
            center=(float(x), float(y)),
            filled=filled,
            scale=settings.baseline_marker_ratio if index in ends else 1.0,
        )
        for index, (x, y) in enumerate(config.coords)
    ]


def grid_scene(
    grid: DeformedGrid,
    observed: Optional[LandmarkConfiguration] = None,
    predicted: Optional[LandmarkConfiguration] = None,
    baseline: Optional[Baseline] = None,
    viewport: Optional[Viewport] = None,
    title: Optional[str] = None,
) -> Scene:
    """Deformed grid with solid circles for observed and open circles for predicted landmarks."""
    layers = list(grid_layers(grid))
    framing = [grid_points(grid)]
    if observed is not None:
        layers += landmark_markers(observed, filled=True, baseline=baseline)
        framing.append(observed.coords)
    if predicted is not None:
        layers += landmark_markers(predicted, filled=False, baseline=baseline)
        framing.append(predicted.coords)
    if viewport is None:
        viewport = fit_viewport(np.concatenate(framing))
    return Scene(viewport=viewport, layers=layers, title=title)


def network_scene(
    template: LandmarkConfiguration,
    target: LandmarkConfiguration,
    segments: Sequence[Tuple[int, int]],
    viewport: Optional[Viewport] = None,
    title: Optional[str] = None,
) -> Scene:
    """Segment network drawn light on the template and heavy on the target."""
    start = [(float(x), float(y)) for x, y in template.coords]
    end = [(float(x), float(y)) for x, y in target.coords]
    layers = [
        SegmentNetwork(points=start, segments=list(segments), weight=LineWeight.LIGHT),
        SegmentNetwork(points=end, segments=list(segments), weight=LineWeight.HEAVY),
    ]
    layers += landmark_markers(template, filled=False)
    layers += landmark_markers(target, filled=True)
    layers += [
        Label(position=(float(x), float(y)), text=str(index + 1)) for index, (x, y) in enumerate(target.coords)
    ]
    if viewport is None:
        viewport = fit_viewport(np.concatenate([template.coords, target.coords]), pad=0.12)
    return Scene(viewport=viewport, layers=layers, title=title)


def registered_scene(
    template: LandmarkConfiguration,
    target: LandmarkConfiguration,
    baseline: Baseline,
    viewport: Optional[Viewport] = None,
    title: Optional[str] = None,
) -> Scene:
    """Two-point superposition: template outline light, landmark shifts heavy, baseline circled."""
    start = [(float(x), float(y)) for x, y in template.coords]
    end = [(float(x), float(y)) for x, y in target.coords]
    layers = [
        Polyline(points=start, weight=LineWeight.LIGHT, closed=True),
        Polyline(points=end, weight=LineWeight.LIGHT, closed=True),
    ]
    layers += [Polyline(points=[a, b], weight=LineWeight.HEAVY) for a, b in zip(start, end) if a != b]
    layers += landmark_markers(template, filled=False, baseline=baseline)
    layers += landmark_markers(target, filled=True, baseline=baseline)
    if viewport is None:
        viewport = fit_viewport(np.concatenate([template.coords, target.coords]), pad=0.12)
    return Scene(viewport=viewport, layers=layers, title=title)


def compose_grid(scenes: Sequence[Scene], columns: int, title: Optional[str] = None) -> Scene:
    """Lay sub-scenes out row by row in equal cells sized by the largest sub-viewport."""
    if columns < 1:
        raise ValueError(f"columns must be positive, got {columns}")
    cell_w = max((s.viewport.width for s in scenes), default=float(settings.panel_size))
    cell_h = max((s.viewport.height for s in scenes), default=float(settings.panel_size))
    rows = max(1, math.ceil(len(scenes) / columns))
    header = 24.0 if title else 0.0
    panels = [
        Panel(scene=scene, x=(index % columns) * cell_w, y=header + (index // columns) * cell_h)
        for index, scene in enumerate(scenes)
    ]
    width = min(columns, max(len(scenes), 1)) * cell_w
    height = header + rows * cell_h
    viewport = Viewport(x_min=0.0, x_max=width, y_min=0.0, y_max=height, width=width, height=height)
    return Scene(viewport=viewport, panels=panels, title=title)


def compose_four_panel(observed: Scene, fitted: Scene, trend: Scene, trimmed: Scene, title: Optional[str] = None) -> Scene:
    """Observed spline | spline of fitted points / trend grid with markers | trimmed trend grid."""
    return compose_grid([observed, fitted, trend, trimmed], columns=2, title=title)
