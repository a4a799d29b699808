"""Helper functions for Chemostat Control."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config_flow import RunConfig, config_with
from .const import (
    ATTR_ERROR,
    CSV_COLUMNS,
    CSV_FLOAT_FORMAT,
    DEFAULT_TOL_ABS,
    DEFAULT_TOL_REL,
    SUMMARY_FILE,
    SWEEP_AXES,
    TIMESERIES_FILE,
)
from .diagnostics import summary_record
from .exceptions import ChemostatError, ConfigValidationError, GoldenMismatch
from .pde_sim import TimeSeries, run_simulation

_LOGGER = logging.getLogger(__name__)


def output_path(config: RunConfig, out_dir: Optional[str] = None) -> Path:
    """Return the directory a run writes into.

    Returns ``out_dir`` when given, otherwise <output root>/<config name>
    """
    if out_dir is not None:
        return Path(out_dir)
    return Path(config.out_dir) / config.name


def write_timeseries(series: TimeSeries, path: Path) -> None:
    """Write the per-step records as CSV with a header row."""
    table = np.column_stack([series.column(name) for name in CSV_COLUMNS])
    fmt = ["%d"] + [CSV_FLOAT_FORMAT] * (len(CSV_COLUMNS) - 1)
    np.savetxt(
        path,
        table,
        fmt=fmt,
        delimiter=",",
        header=",".join(CSV_COLUMNS),
        comments="",
    )


def read_timeseries(path: Path) -> Tuple[List[str], np.ndarray]:
    """Read a time series CSV.

    Returns the header names and a 2-D array of the rows
    """
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_summary(record: Dict[str, Any], path: Path) -> None:
    """Write a summary record as JSON."""
    path.write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")


def hash_file(filename: Path) -> str:
    """Return the SHA-1 hash of the file passed into it.

    Used to check that reruns are byte-identical
    """
    digest = hashlib.sha1()  # nosec
    with open(filename, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run(
    config: RunConfig, out_dir: Optional[str] = None
) -> Tuple[TimeSeries, Dict[str, Any]]:
    """Simulate a configuration and write its CSV and summary."""
    series = run_simulation(
        config.params,
        config.eq,
        config.controller,
        config.initial_profile(),
        config.t_end,
        stride=config.stride,
    )
    record = summary_record(config, series)

    target = output_path(config, out_dir)
    target.mkdir(parents=True, exist_ok=True)
    write_timeseries(series, target / TIMESERIES_FILE)
    write_summary(record, target / SUMMARY_FILE)
    _LOGGER.info("Wrote %s rows for %s to %s", len(series), config.name, target)
    return series, record


def compare(
    run_path: Path,
    golden_path: Path,
    tol_rel: float = DEFAULT_TOL_REL,
    tol_abs: float = DEFAULT_TOL_ABS,
) -> int:
    """Compare a run CSV with a golden CSV column by column.

    A value passes when |run - golden| <= tol_abs + tol_rel*|golden|, and two
    NaNs compare equal. Returns the number of rows checked; the first
    divergence raises GoldenMismatch with its data row and column.
    """
    header, data = read_timeseries(run_path)
    golden_header, golden = read_timeseries(golden_path)

    if header != golden_header:
        for column, (mine, theirs) in enumerate(
            itertools.zip_longest(header, golden_header)
        ):
            if mine != theirs:
                raise GoldenMismatch(
                    f"header differs: {mine} != {theirs}",
                    row=0,
                    column=str(theirs if theirs is not None else mine),
                )
    if data.shape[0] != golden.shape[0]:
        row = min(data.shape[0], golden.shape[0])
        raise GoldenMismatch(
            f"row count differs: {data.shape[0]} != {golden.shape[0]}",
            row=row,
            column=header[0],
        )

    both_nan = np.isnan(data) & np.isnan(golden)
    close = np.abs(data - golden) <= tol_abs + tol_rel * np.abs(golden)
    bad = np.argwhere(~(close | both_nan))
    if bad.size:
        row, column = (int(index) for index in bad[0])
        raise GoldenMismatch(
            f"{header[column]} differs at row {row}: "
            f"{data[row, column]!r} != {golden[row, column]!r}",
            row=row,
            column=header[column],
        )
    _LOGGER.info("%s matches %s on %s rows", run_path, golden_path, data.shape[0])
    return int(data.shape[0])


def parse_axis(text: str) -> Tuple[str, List[float]]:
    """Parse an axis spec of the form name=v1,v2,...

    Returns the axis name and its values
    """
    name, sep, values = text.partition("=")
    name = name.strip()
    if not sep or name not in SWEEP_AXES:
        raise ConfigValidationError(
            f"axis must be one of {', '.join(SWEEP_AXES)} as name=v1,v2", name
        )
    try:
        parsed = [float(value) for value in values.split(",") if value.strip()]
    except ValueError as err:
        raise ConfigValidationError(f"bad value list {values!r}", name) from err
    if not parsed:
        raise ConfigValidationError("axis needs at least one value", name)
    return name, parsed


def sweep_points(axes: Dict[str, Sequence[float]]) -> List[Dict[str, float]]:
    """Return the grid points of a sweep in deterministic axis order."""
    names = [axis for axis in SWEEP_AXES if axis in axes]
    unknown = set(axes) - set(names)
    if unknown:
        raise ConfigValidationError(f"cannot sweep over {sorted(unknown)}", "axis")
    return [
        dict(zip(names, values))
        for values in itertools.product(*(axes[name] for name in names))
    ]


def run_sweep_row(config: RunConfig, point: Dict[str, float]) -> Dict[str, Any]:
    """Run one sweep point and return its summary row.

    Failures of the point are logged and stored in the error column
    """
    row: Dict[str, Any] = dict(point)
    try:
        for axis, value in point.items():
            config = config_with(config, axis, value)
        series = run_simulation(
            config.params,
            config.eq,
            config.controller,
            config.initial_profile(),
            config.t_end,
            stride=config.stride,
        )
        row.update(summary_record(config, series))
        row[ATTR_ERROR] = ""
    except ChemostatError as err:
        _LOGGER.warning("Sweep point %s failed: %s", point, err)
        row[ATTR_ERROR] = str(err)
    return row


def write_sweep(rows: Sequence[Dict[str, Any]], path: Path) -> None:
    """Write sweep rows as CSV, columns in first-seen order and error last."""
    frame = pd.DataFrame(list(rows))
    columns = [column for column in frame.columns if column != ATTR_ERROR]
    if ATTR_ERROR in frame.columns:
        columns.append(ATTR_ERROR)
    frame[columns].to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
