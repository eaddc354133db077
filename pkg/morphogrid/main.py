"""Command-line entry point for morphogrid."""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from loguru import logger
from pydantic import ValidationError

from morphogrid.api import commands
from morphogrid.core.config import DEFAULT_TRIM, settings
from morphogrid.core.errors import InputError, MorphoGridError

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)


def configure_logging(level: Optional[str] = None) -> None:
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level=(level or settings.log_level).upper())


def load_config(path: Path) -> Dict[str, Any]:
    """Flag defaults from a JSON or YAML mapping; keys are flag names with or without dashes."""
    try:
        values = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise InputError(f"config file {path} must hold a mapping of flag names to values")
    return {str(key).lstrip("-").replace("-", "_"): value for key, value in values.items()}


def _input_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-i", "--input", default="dataset.json", help="Dataset (.json, .tps or .csv)")


def _targets_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--targets",
        type=commands.group_pair,
        default=None,
        help="Template and target group tags, e.g. age7,age150 (default: first two groups)",
    )


class OptionParser(argparse.ArgumentParser):
    """ArgumentParser that keeps its options by destination, for config-file coercion."""

    def __init__(self, *args, **kwargs):
        self.options: Dict[str, argparse.Action] = {}
        super().__init__(*args, **kwargs)

    def add_argument(self, *args, **kwargs) -> argparse.Action:
        action = super().add_argument(*args, **kwargs)
        self.options[action.dest] = action
        return action


def build_parser() -> OptionParser:
    parser = OptionParser(
        prog="morphogrid",
        description="Two-point registration, segment rotations, splines and trend-surface grids for 2D landmarks.",
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON or YAML file of flag defaults")
    parser.add_argument("--log-level", default=None, help="Override MORPHOGRID_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=OptionParser)

    p = sub.add_parser("ingest", help="Convert TPS/CSV/JSON landmark files into one canonical dataset")
    p.add_argument("inputs", nargs="+", help="Landmark files; format chosen by extension")
    p.add_argument("-o", "--output", required=True, help="Canonical JSON dataset to write")
    p.add_argument("--group", nargs="+", default=None, help="Group tag for all inputs, or one per input")

    p = sub.add_parser("average", help="Procrustes mean of each group")
    _input_option(p)
    p.add_argument("--group", default=None, help="Only this group")
    p.add_argument("-o", "--output", required=True, help="Dataset of group means to write")

    p = sub.add_parser("twopoint", help="Two-point registration of configurations or group means")
    _input_option(p)
    p.add_argument("--baseline", type=commands.baseline_pair, default=(1, 2), help="1-based landmark pair, e.g. 3,8")
    p.add_argument("--means", action="store_true", help="Register pooled group means instead of specimens")
    _targets_option(p)
    p.add_argument("-o", "--output", required=True, help="Registered dataset to write")
    p.add_argument("--outdir", default=None, help="Also draw the first two registered shapes here")

    p = sub.add_parser("survey", help="Two-point superpositions on every baseline")
    _input_option(p)
    _targets_option(p)
    p.add_argument("--columns", type=int, default=settings.survey_columns)
    p.add_argument("--workers", type=int, default=settings.workers)
    p.add_argument("--outdir", default=".")

    p = sub.add_parser("rotations", help="Segments whose direction changes by at least a threshold")
    _input_option(p)
    _targets_option(p)
    p.add_argument("--threshold", type=float, default=settings.rotation_threshold, help="Radians")
    p.add_argument("--nonaffine", action="store_true", help="Remove the uniform component first")
    p.add_argument("--outdir", default=None)

    p = sub.add_parser("fit", help="Trend-surface fit with the four-panel grid composite")
    _input_option(p)
    _targets_option(p)
    p.add_argument("--degree", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--baseline", type=commands.baseline_pair, nargs="+", default=None, help="1-based pairs, e.g. 3,8")
    p.add_argument("--trim", type=commands.trim_choice, default=commands.trim_choice(DEFAULT_TRIM))
    p.add_argument("--extend", type=commands.extension, nargs="+", default=None, help="e.g. left:2.0")
    p.add_argument("--cells", type=int, default=None, help="Cells along the longer grid side")
    p.add_argument("--workers", type=int, default=settings.workers)
    p.add_argument("--outdir", default=".")

    p = sub.add_parser("demo", help="Prototype deformations and synthetic datasets")
    p.add_argument("kind", choices=commands.DEMO_CHOICES)
    p.add_argument("--parameter", type=float, default=None, help="Shear, taper or bend amount")
    p.add_argument("--outdir", default=".")
    parser.set_defaults(subcommands=sub.choices)
    return parser


def _coerce(parser: OptionParser, values: Dict[str, Any]) -> Dict[str, Any]:
    """Run config values through each option's type so they match parsed flags."""
    actions = parser.options
    coerced = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None:
            logger.warning(f"Ignoring unknown config key {key!r}")
            continue
        convert = action.type
        if convert is not None:
            if isinstance(value, list) and action.nargs == "+" and all(isinstance(v, (list, tuple, str)) for v in value):
                value = [v if isinstance(v, tuple) else convert(_as_text(v)) for v in value]
            elif action.nargs == "+":
                value = [convert(_as_text(value))]
            else:
                value = convert(_as_text(value))
        coerced[key] = value
    return coerced


def _as_text(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        subparser = args.subcommands[args.command]
        try:
            subparser.set_defaults(**_coerce(subparser, load_config(args.config)))
        except argparse.ArgumentTypeError as exc:
            raise InputError(f"bad value in config file {args.config}: {exc}") from None
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except MorphoGridError as exc:
        logger.error(str(exc))
        return exc.exit_code
    configure_logging(args.log_level)

    handler = commands.HANDLERS[args.command]
    try:
        return handler(args)
    except MorphoGridError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"{args.command} failed: invalid input: {exc.errors()[0]['msg']}")
        return InputError.exit_code
    except FileNotFoundError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return InputError.exit_code
    except Exception as exc:
        logger.exception(f"{args.command} failed unexpectedly: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
