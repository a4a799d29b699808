"""Chemostat Control: sampled-data dilution feedback for age-structured chemostats."""
from __future__ import annotations

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

from async_timeout import timeout

from .config_flow import RunConfig
from .const import ATTR_ERROR, DEFAULT_JOBS, DEFAULT_RUN_TIMEOUT, VERSION
from .exceptions import ChemostatError
from .helpers import run_sweep_row, sweep_points

__version__ = VERSION

_LOGGER = logging.getLogger(__name__)


class SweepCoordinator:
    """Class to manage running the points of a parameter sweep."""

    def __init__(
        self,
        config: RunConfig,
        axes: Dict[str, Sequence[float]],
        jobs: int = DEFAULT_JOBS,
        the_timeout: float = DEFAULT_RUN_TIMEOUT,
    ) -> None:
        """Initialize."""
        self.config = config
        self.points = sweep_points(axes)
        self.jobs = max(1, jobs)
        self.timeout = the_timeout
        self.rows: List[Dict[str, Any]] = []

        _LOGGER.debug(
            "Sweep of %s points on %s workers", len(self.points), self.jobs
        )

    async def _async_run_point(
        self, executor: ThreadPoolExecutor, point: Dict[str, float]
    ) -> Dict[str, Any]:
        """Run one point in the executor."""
        loop = asyncio.get_running_loop()
        async with timeout(self.timeout):
            return await loop.run_in_executor(
                executor, run_sweep_row, self.config, point
            )

    async def async_run(self) -> List[Dict[str, Any]]:
        """Run every point and return the rows in axis order."""
        _LOGGER.info("Starting sweep of %s points", len(self.points))
        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            results = await asyncio.gather(
                *(self._async_run_point(executor, point) for point in self.points),
                return_exceptions=True,
            )

        rows: List[Dict[str, Any]] = []
        for point, result in zip(self.points, results):
            if isinstance(result, BaseException):
                _LOGGER.error("Problem running sweep point %s: %s", point, result)
                rows.append({**point, ATTR_ERROR: str(result) or repr(result)})
            else:
                rows.append(result)

        self.rows = rows
        failed = sum(1 for row in rows if row[ATTR_ERROR])
        _LOGGER.info("Sweep finished: %s of %s points failed", failed, len(rows))
        return rows

    @property
    def succeeded(self) -> bool:
        """Return True when at least one point ran without error."""
        return any(not row[ATTR_ERROR] for row in self.rows)


def run_sweep(
    config: RunConfig,
    axes: Dict[str, Sequence[float]],
    jobs: int = DEFAULT_JOBS,
    the_timeout: Optional[float] = None,
) -> List[Dict[str, Any]]:
    """Run a sweep to completion from synchronous code."""
    coordinator = SweepCoordinator(
        config, axes, jobs, the_timeout or DEFAULT_RUN_TIMEOUT
    )
    return asyncio.run(coordinator.async_run())


__all__ = ["ChemostatError", "SweepCoordinator", "run_sweep", "__version__"]
