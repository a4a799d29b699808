"""Tests for init."""
import logging
import time
from unittest.mock import patch

from chemostat_control import SweepCoordinator, __version__, run_sweep
from chemostat_control.const import VERSION


def test_version():
    assert __version__ == VERSION


async def test_sweep_keeps_point_order(fake_config):
    coordinator = SweepCoordinator(
        fake_config, {"bias": [0.7, 1.0], "T": [0.4, 0.41, 0.8]}, jobs=3
    )
    assert coordinator.jobs == 3
    rows = await coordinator.async_run()

    assert [(row["T"], row["bias"]) for row in rows] == [
        (point["T"], point["bias"]) for point in coordinator.points
    ]
    assert [row["T"] for row in rows[:2]] == [0.4, 0.4]
    failed = [row for row in rows if row["error"]]
    assert len(failed) == 2
    assert all(row["T"] == 0.41 for row in failed)
    assert coordinator.succeeded
    assert coordinator.rows is rows


async def test_sweep_point_exception(fake_config, caplog):
    caplog.set_level(logging.ERROR)
    with patch(
        "chemostat_control.run_sweep_row", side_effect=RuntimeError("worker died")
    ):
        coordinator = SweepCoordinator(fake_config, {"T": [0.4]})
        rows = await coordinator.async_run()

    assert rows == [{"T": 0.4, "error": "worker died"}]
    assert not coordinator.succeeded
    assert "Problem running sweep point" in caplog.text


async def test_sweep_point_timeout(fake_config):
    def slow_row(config, point):
        time.sleep(0.5)
        return {**point, "error": ""}

    with patch("chemostat_control.run_sweep_row", side_effect=slow_row):
        coordinator = SweepCoordinator(fake_config, {"T": [0.4]}, the_timeout=0.05)
        rows = await coordinator.async_run()

    assert rows[0]["error"] == "TimeoutError()"


def test_run_sweep(fake_config):
    rows = run_sweep(fake_config, {"bias": [1.0]}, jobs=2)
    assert len(rows) == 1
    assert rows[0]["error"] == ""
    assert rows[0]["steps"] == 100
