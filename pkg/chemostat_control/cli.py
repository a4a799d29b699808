"""Command line front end for Chemostat Control."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import run_sweep
from .config_flow import (
    STRINGS_FILE,
    RunConfig,
    load_config,
    preset_config,
    save_config,
)
from .const import (
    ATTR_ERROR,
    DEFAULT_JOBS,
    DEFAULT_RUN_TIMEOUT,
    DEFAULT_TOL_ABS,
    DEFAULT_TOL_REL,
    EXIT_CONFIG,
    EXIT_MISMATCH,
    EXIT_NUMERICAL,
    EXIT_OK,
    PRESETS,
    SWEEP_FILE,
    TIMESERIES_FILE,
    VERSION,
)
from .diagnostics import ide_check_report
from .exceptions import (
    ChemostatError,
    ConfigParseError,
    ConfigValidationError,
    GoldenMismatch,
)
from .helpers import compare, output_path, parse_axis, run, write_sweep

_LOGGER = logging.getLogger(__name__)


def _exit_label(code: int) -> str:
    strings = json.loads(STRINGS_FILE.read_text(encoding="utf-8"))
    return strings["cli"]["exit"].get(str(code), str(code))


def _print_json(document: dict) -> None:
    print(json.dumps(document, indent=2, sort_keys=True))


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Return the configuration named by --config or --preset."""
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = preset_config(args.preset)
    else:
        raise ConfigValidationError("one of --config or --preset is required")
    if getattr(args, "stride", None):
        config = replace(config, stride=args.stride)
    return config


def _cmd_solve_eq(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    _print_json(
        {
            "d_star": config.eq.d_star,
            "y_star": config.eq.y_star,
            "beta": config.eq.beta,
            "f_star_boundary": float(config.eq.f_star.values[0]),
        }
    )
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    _, record = run(config, args.out)
    _print_json(record)
    return EXIT_OK


def _cmd_preset(args: argparse.Namespace) -> int:
    config = preset_config(args.name)
    if getattr(args, "stride", None):
        config = replace(config, stride=args.stride)
    if args.save:
        save_config(config, args.save)
        _LOGGER.info("Saved preset %s to %s", args.name, args.save)
        return EXIT_OK
    _, record = run(config, args.out)
    _print_json(record)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    axes: Dict[str, List[float]] = {}
    for text in args.axis:
        name, values = parse_axis(text)
        axes[name] = values
    if not axes:
        raise ConfigValidationError("at least one --axis is required", "axis")

    rows = run_sweep(config, axes, args.jobs, args.timeout)
    target = output_path(config, args.out)
    target.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, target / SWEEP_FILE)
    _LOGGER.info("Wrote %s sweep rows to %s", len(rows), target / SWEEP_FILE)
    if all(row[ATTR_ERROR] for row in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    run_path = Path(args.run)
    if run_path.is_dir():
        run_path = run_path / TIMESERIES_FILE
    compare(run_path, Path(args.golden), args.tol_rel, args.tol_abs)
    return EXIT_OK


def _cmd_ide_check(args: argparse.Namespace) -> int:
    _print_json(ide_check_report(_resolve_config(args)))
    return EXIT_OK


def _add_source(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--config", metavar="PATH", help="JSON configuration file")
    group.add_argument("--preset", choices=sorted(PRESETS), help="scenario preset")


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser."""
    parser = argparse.ArgumentParser(
        prog="chemostat_control",
        description="Simulate sampled-data dilution control of a chemostat.",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logs")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve-eq", help="solve for D* and the equilibrium")
    _add_source(solve)
    solve.set_defaults(handler=_cmd_solve_eq)

    run_cmd = commands.add_parser("run", help="simulate and write CSV and summary")
    _add_source(run_cmd)
    run_cmd.add_argument("--out", metavar="DIR", help="output directory")
    run_cmd.add_argument("--stride", type=int, help="record every N-th step")
    run_cmd.set_defaults(handler=_cmd_run)

    preset = commands.add_parser("preset", help="run or save a scenario preset")
    preset.add_argument("name", choices=sorted(PRESETS))
    preset.add_argument("--out", metavar="DIR", help="output directory")
    preset.add_argument("--stride", type=int, help="record every N-th step")
    preset.add_argument("--save", metavar="PATH", help="write the preset config")
    preset.set_defaults(handler=_cmd_preset)

    sweep = commands.add_parser("sweep", help="run a grid of configurations")
    _add_source(sweep)
    sweep.add_argument(
        "--axis",
        action="append",
        default=[],
        metavar="NAME=V1,V2",
        help="axis over T, bias, b0, c or theta; repeatable",
    )
    sweep.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    sweep.add_argument("--timeout", type=float, default=DEFAULT_RUN_TIMEOUT)
    sweep.add_argument("--out", metavar="DIR", help="output directory")
    sweep.add_argument("--stride", type=int, help="record every N-th step")
    sweep.set_defaults(handler=_cmd_sweep)

    comp = commands.add_parser("compare", help="check a run against a golden CSV")
    comp.add_argument("run", help="run CSV or run directory")
    comp.add_argument("--golden", metavar="PATH", required=True)
    comp.add_argument("--tol-rel", type=float, default=DEFAULT_TOL_REL)
    comp.add_argument("--tol-abs", type=float, default=DEFAULT_TOL_ABS)
    comp.set_defaults(handler=_cmd_compare)

    check = commands.add_parser("ide-check", help="IDE and envelope diagnostics")
    _add_source(check)
    check.set_defaults(handler=_cmd_ide_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handler: Callable[[argparse.Namespace], int] = args.handler

    code = EXIT_OK
    try:
        code = handler(args)
    except (ConfigParseError, ConfigValidationError) as err:
        _LOGGER.error("%s", err)
        code = EXIT_CONFIG
    except GoldenMismatch as err:
        _LOGGER.error("%s (row %s, column %s)", err, err.row, err.column)
        code = EXIT_MISMATCH
    except ChemostatError as err:
        _LOGGER.error("%s", err)
        code = EXIT_NUMERICAL
    if code != EXIT_OK:
        _LOGGER.error("Exiting with %s: %s", code, _exit_label(code))
    return code
