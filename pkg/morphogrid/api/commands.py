"""Command handlers: each takes parsed arguments, writes its declared outputs, returns an exit code."""
import argparse
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from morphogrid.core.config import settings
from morphogrid.core.errors import BaselineRangeError, UnknownGroupError
from morphogrid.models.landmarks import Baseline, Dataset, LandmarkConfiguration, Provenance, Sample
from morphogrid.models.results import BilinearMap, PrototypeKind, SegmentRotationReport
from morphogrid.models.scene import Scene
from morphogrid.services import dataset_io
from morphogrid.services.geometry import enumerate_segments
from morphogrid.services.gridlab import (
    deform_grid,
    extend_grid,
    filter_rotations,
    kept_fraction,
    make_grid,
    segment_rotations,
    trim_grid,
    trim_polygon,
)
from morphogrid.services.maps import homography_from_quads, prototype_pair, quad_from_configuration
from morphogrid.services.registration import gpa_mean, group_means, remove_affine, two_point_register
from morphogrid.services.render import (
    compose_four_panel,
    compose_grid,
    fit_viewport,
    grid_points,
    grid_scene,
    network_scene,
    registered_scene,
    render_scene,
)
from morphogrid.services.synthetic import vilmann_analog
from morphogrid.services.tps import bending_energy, tps_fit
from morphogrid.services.trend import (
    MONOMIALS,
    centroid_separation,
    check_landmark_count,
    trend_fit,
    trend_residual_report,
)

DEMO_CHOICES = [kind.value for kind in PrototypeKind] + ["synthetic-vilmann"]


# argparse value types

def baseline_pair(text: str) -> Tuple[int, int]:
    """``"3,8"`` -> (3, 8); numbers are 1-based landmark positions."""
    parts = str(text).replace(" ", "").split(",")
    try:
        start, end = (int(part) for part in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"baseline must look like 3,8 (got {text!r})") from None
    if start < 1 or end < 1 or start == end:
        raise argparse.ArgumentTypeError(f"baseline needs two different landmark numbers from 1 (got {text!r})")
    return start, end


def extension(text: str) -> Tuple[str, float]:
    """``"left:2.0"`` -> ("left", 2.0)."""
    direction, _, amount = str(text).partition(":")
    if direction not in ("left", "right", "up", "down"):
        raise argparse.ArgumentTypeError(f"extension direction must be left, right, up or down (got {direction!r})")
    try:
        multiples = float(amount)
    except ValueError:
        raise argparse.ArgumentTypeError(f"extension must look like left:2.0 (got {text!r})") from None
    if not multiples > 0:
        raise argparse.ArgumentTypeError(f"extension multiple must be positive (got {text!r})")
    return direction, multiples


def trim_choice(text: str) -> Tuple[str, str]:
    """``"template"``, ``"target:hull"`` ... -> (against, polygon mode)."""
    against, _, mode = str(text).partition(":")
    mode = mode or "order"
    if against not in ("template", "target") or mode not in ("order", "hull"):
        raise argparse.ArgumentTypeError(f"trim must be template|target[:order|hull] (got {text!r})")
    return against, mode


def group_pair(text: str) -> Tuple[str, str]:
    parts = [part.strip() for part in str(text).split(",") if part.strip()]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"targets must name two groups, e.g. age7,age150 (got {text!r})")
    return parts[0], parts[1]


# shared plumbing

def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")
    return path


def _load_sample(args: argparse.Namespace) -> Sample:
    return dataset_io.ingest_file(Path(args.input)).sample


def _to_baseline(pair: Tuple[int, int], k: int) -> Baseline:
    start, end = pair
    if start > k or end > k:
        raise BaselineRangeError(f"baseline {start},{end} is out of range for {k} landmarks")
    return Baseline.of(start - 1, end - 1)


def _comparison_groups(sample: Sample, targets: Optional[Tuple[str, str]]) -> Tuple[Sample, Tuple[str, str]]:
    """Template and target group tags; a one-group sample of two specimens compares the specimens."""
    if targets is not None:
        for tag in targets:
            sample.select(tag)
        return sample, targets
    names = sample.group_names()
    if len(names) >= 2:
        return sample, (names[0], names[1])
    if len(sample.configurations) == 2:
        split = sample.model_copy(update={"groups": {c.name: c.name for c in sample.configurations}})
        return split, (sample.configurations[0].name, sample.configurations[1].name)
    raise UnknownGroupError(
        "cannot tell template from target; pass --targets <template>,<target>",
        {"groups": names},
    )


def _comparison_pair(sample: Sample, targets: Optional[Tuple[str, str]]) -> Tuple[LandmarkConfiguration, LandmarkConfiguration]:
    sample, (first, second) = _comparison_groups(sample, targets)
    means = group_means(sample, [first, second])
    return means[first], means[second]


def _dataset_of(configurations: List[LandmarkConfiguration], source: Sample, args: argparse.Namespace) -> Dataset:
    sample = Sample(
        configurations=configurations,
        groups={c.name: source.groups.get(c.name, c.name) for c in configurations},
        metadata=source.metadata,
    )
    return Dataset(sample=sample, provenance=Provenance(sources=[str(args.input)]))


# ingest / average / twopoint

def ingest(args: argparse.Namespace) -> int:
    groups = list(args.group or [])
    if groups and len(groups) not in (1, len(args.inputs)):
        raise UnknownGroupError(f"give one --group for all inputs or one per input ({len(args.inputs)} inputs)")
    datasets = []
    for index, path in enumerate(args.inputs):
        group = groups[index] if len(groups) > 1 else (groups[0] if groups else None)
        datasets.append(dataset_io.ingest_file(Path(path), group=group))
    dataset = dataset_io.merge_datasets(datasets)
    dataset_io.save_dataset(dataset, Path(args.output))
    print(f"{len(dataset.sample.configurations)} configurations, {dataset.sample.landmark_count} landmarks -> {args.output}")
    return 0


def average(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    tags = [args.group] if args.group else sample.group_names()
    means = [gpa_mean(sample.select(tag), name=tag) for tag in tags]
    dataset = Dataset(
        sample=Sample(configurations=means, groups={tag: tag for tag in tags}, metadata=sample.metadata),
        provenance=Provenance(sources=[str(args.input)]),
    )
    dataset_io.save_dataset(dataset, Path(args.output))
    for tag in tags:
        print(tag)
    return 0


def twopoint(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    baseline = _to_baseline(args.baseline, sample.landmark_count)
    if args.means:
        sample, tags = _comparison_groups(sample, args.targets)
        means = group_means(sample)
        sources = [means[tag] for tag in sample.group_names()]
    else:
        sources = list(sample.configurations)
    registered = [two_point_register(config, baseline) for config in sources]
    dataset_io.save_dataset(_dataset_of(registered, sample, args), Path(args.output))

    if args.outdir and len(registered) >= 2:
        first, second = registered[0], registered[1]
        if args.means:
            by_name = {c.name: c for c in registered}
            first, second = by_name[tags[0]], by_name[tags[1]]
        scene = registered_scene(first, second, baseline, title=_baseline_title(sample.labels, baseline))
        _write(Path(args.outdir) / f"twopoint_{baseline.tag()}.svg", render_scene(scene))
    return 0


def _baseline_title(labels: Sequence[str], baseline: Baseline) -> str:
    return f"{labels[baseline.start]}-{labels[baseline.end]} ({baseline.tag()})"


# survey

def _survey_panel(template: LandmarkConfiguration, target: LandmarkConfiguration, baseline: Baseline) -> Scene:
    size = settings.panel_size / 2
    a = two_point_register(template, baseline)
    b = two_point_register(target, baseline)
    viewport = fit_viewport(np.concatenate([a.coords, b.coords]), pad=0.12, width=size, height=size)
    return registered_scene(a, b, baseline, viewport=viewport, title=_baseline_title(template.labels, baseline))


def survey(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    template, target = _comparison_pair(sample, args.targets)
    baselines = [Baseline.of(s.i, s.j) for s in enumerate_segments(len(template))]
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        panels = list(pool.map(lambda b: _survey_panel(template, target, b), baselines))
    scene = compose_grid(panels, columns=args.columns, title=f"{template.name} vs {target.name}: every baseline")
    _write(Path(args.outdir) / "survey.svg", render_scene(scene))
    print(f"{len(panels)} baselines")
    return 0


# rotations

def rotation_table(report: SegmentRotationReport, segments) -> pd.DataFrame:
    index = report.by_segment()
    rows = []
    for segment in segments:
        entry = index[segment.as_tuple()]
        rows.append(
            {
                "segment": f"{segment.i + 1}-{segment.j + 1}",
                "from": report.labels[segment.i],
                "to": report.labels[segment.j],
                "rotation_rad": entry.rotation,
                "rotation_deg": float(np.degrees(entry.rotation)),
                "length_ratio": entry.length_ratio,
            }
        )
    return pd.DataFrame(rows, columns=["segment", "from", "to", "rotation_rad", "rotation_deg", "length_ratio"])


def rotations(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    template, target = _comparison_pair(sample, args.targets)
    if args.nonaffine:
        target = remove_affine(template, target)
    report = segment_rotations(template, target)
    passing = filter_rotations(report, args.threshold)
    table = rotation_table(report, passing)
    print(f"{len(passing)} of {len(report.entries)} segments rotate by at least {args.threshold:g} rad")
    if len(table):
        print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))

    if args.outdir:
        suffix = "_nonaffine" if args.nonaffine else ""
        title = f"{len(passing)} segments over {args.threshold:g} rad" + (" (nonaffine)" if args.nonaffine else "")
        scene = network_scene(template, target, [s.as_tuple() for s in passing], title=title)
        _write(Path(args.outdir) / f"rotations{suffix}.svg", render_scene(scene))
    return 0


# fit

class FitOutcome(NamedTuple):
    tag: str
    panels: List[Scene]
    svg: str
    report: Dict[str, Any]
    table: pd.DataFrame


def _fit_one(
    template: LandmarkConfiguration,
    target: LandmarkConfiguration,
    baseline: Baseline,
    degree: int,
    trim: Tuple[str, str],
    extensions: Sequence[Tuple[str, float]],
    cells: Optional[int],
) -> FitOutcome:
    p = two_point_register(template, baseline)
    q = two_point_register(target, baseline)
    trend = trend_fit(p, q, degree)
    fitted = q.with_coords(trend.fitted, name=f"{q.name}_fitted")
    observed_spline = tps_fit(p, q)
    fitted_spline = tps_fit(p, fitted)

    spec = make_grid(p, cells=cells)
    for direction, multiples in extensions:
        spec = extend_grid(spec, direction, multiples)

    observed_grid = deform_grid(spec, observed_spline)
    fitted_grid = deform_grid(spec, fitted_spline)
    trend_grid = deform_grid(spec, trend)
    against, mode = trim
    polygon = trim_polygon(p if against == "template" else q, mode)
    trimmed_grid = trim_grid(trend_grid, polygon, against=against)

    framing = np.concatenate(
        [grid_points(g) for g in (observed_grid, fitted_grid, trend_grid)] + [p.coords, q.coords]
    )
    viewport = fit_viewport(framing)
    panels = [
        grid_scene(observed_grid, observed=q, baseline=baseline, viewport=viewport, title="observed spline"),
        grid_scene(fitted_grid, predicted=fitted, baseline=baseline, viewport=viewport, title="spline of fitted points"),
        grid_scene(trend_grid, observed=q, predicted=fitted, baseline=baseline, viewport=viewport, title=f"degree-{degree} trend"),
        grid_scene(trimmed_grid, observed=q, predicted=fitted, baseline=baseline, viewport=viewport, title=f"trimmed to {against}"),
    ]
    svg = render_scene(compose_four_panel(*panels, title=f"{p.name} to {q.name}, baseline {_baseline_title(p.labels, baseline)}"))

    residuals = trend_residual_report(trend)
    report = {
        "baseline": [baseline.start + 1, baseline.end + 1],
        "degree": degree,
        "landmarks": p.labels,
        "monomials": list(MONOMIALS[degree]),
        "coefficients": trend.coefficients.tolist(),
        "residuals": [row.model_dump() for row in residuals.rows],
        "rss": list(residuals.rss),
        "df": residuals.df,
        "saturated": residuals.saturated,
        "condition_number": trend.condition_number,
        "centroid_separation": centroid_separation(trend, q),
        "bending_energy": {"observed": bending_energy(observed_spline), "fitted": bending_energy(fitted_spline)},
        "kept_fraction": kept_fraction(trimmed_grid),
        "trim": {"against": against, "polygon": mode},
    }
    table = pd.DataFrame([row.model_dump() for row in residuals.rows])
    return FitOutcome(baseline.tag(), panels, svg, report, table)


def fit(args: argparse.Namespace) -> int:
    sample = _load_sample(args)
    check_landmark_count(sample.landmark_count, args.degree)
    template, target = _comparison_pair(sample, args.targets)
    baselines = [_to_baseline(pair, len(template)) for pair in args.baseline or [(1, 2)]]
    extensions = list(args.extend or [])
    outdir = Path(args.outdir)

    def run(baseline: Baseline):
        return _fit_one(template, target, baseline, args.degree, args.trim, extensions, args.cells)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(run, baselines))

    for outcome in results:
        _write(outdir / f"fit_{outcome.tag}.svg", outcome.svg)
        _write(outdir / f"fit_{outcome.tag}.json", json.dumps(outcome.report, indent=1) + "\n")
        print(f"baseline {outcome.tag}: degree {args.degree}, df {outcome.report['df']}, RSS {sum(outcome.report['rss']):.6g}")
        print(outcome.table.to_string(index=False, float_format=lambda v: f"{v:.6f}"))

    if len(results) > 1:
        _write(outdir / "fit_summary.svg", render_scene(fit_summary(results, args.degree)))
    return 0


def fit_summary(results: Sequence[FitOutcome], degree: int) -> Scene:
    """One row of four panels per baseline, side by side for comparison."""
    panels = [
        scene.model_copy(update={"title": f"{outcome.tag}: {scene.title}"})
        for outcome in results
        for scene in outcome.panels
    ]
    tags = ", ".join(outcome.tag for outcome in results)
    return compose_grid(panels, columns=4, title=f"degree-{degree} fits on baselines {tags}")


# demo

def _prototype_scene(
    template: LandmarkConfiguration, target: LandmarkConfiguration, mapping, title: str, inside: bool = False
) -> Scene:
    grid = deform_grid(make_grid(template, margin=0.0, cells=8), mapping)
    if inside:
        grid = trim_grid(grid, template.coords)
    return grid_scene(grid, observed=target, title=title)


def demo(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    if args.kind == "synthetic-vilmann":
        dataset = vilmann_analog()
        dataset_io.save_dataset(dataset, outdir / "dataset.json")
        print(outdir / "dataset.json")
        return 0

    kind = PrototypeKind(args.kind)
    template, target = prototype_pair(kind, args.parameter)
    sample = Sample(
        configurations=[template, target],
        groups={template.name: "template", target.name: "target"},
        metadata={"prototype": kind.value, "parameter": args.parameter if args.parameter is not None else settings.prototype_parameter},
    )
    dataset_io.save_dataset(Dataset(sample=sample, provenance=Provenance(sources=[f"demo:{kind.value}"])), outdir / f"{kind.value}.json")
    spline = tps_fit(template, target)
    _write(outdir / f"demo_{kind.value}.svg", render_scene(_prototype_scene(template, target, spline, kind.value.replace("_", " "))))

    if kind is PrototypeKind.KITE:
        src, dst = quad_from_configuration(template), quad_from_configuration(target)
        scenes = [
            _prototype_scene(template, target, spline, "thin-plate spline", inside=True),
            _prototype_scene(template, target, homography_from_quads(src, dst), "projection", inside=True),
            _prototype_scene(template, target, BilinearMap(src=src, dst=dst), "bilinear", inside=True),
        ]
        _write(outdir / "demo_kite_maps.svg", render_scene(compose_grid(scenes, columns=3, title="square to kite")))
    return 0


HANDLERS = {
    "ingest": ingest,
    "average": average,
    "twopoint": twopoint,
    "survey": survey,
    "rotations": rotations,
    "fit": fit,
    "demo": demo,
}
