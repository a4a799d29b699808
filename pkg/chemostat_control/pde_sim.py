"""Characteristic-grid simulation of the controlled age-structured chemostat.

Time and age share the step h, so one time step shifts the profile by one
node along the characteristics. Each step runs the same four stages: renew
the boundary node, measure the output, sample or hold the dilution rate,
then transport.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from .const import CSV_COLUMNS, DEFAULT_STRIDE, KIND_CONSTANT
from .control import (
    ControllerSpec,
    HoldState,
    hold,
    is_sampling_step,
    measurement_for,
    sample_control,
)
from .exceptions import NonPositiveProfile
from .metrics import ratio_envelope
from .model import Equilibrium, ModelParams, grid_steps
from .quadrature import AgeProfile, integrate_profile

__all__ = [
    "AgeProfile",
    "SimState",
    "TimeSeries",
    "measured_output",
    "open_loop",
    "renewal_boundary",
    "run_simulation",
    "run_uncontrolled",
    "transport_step",
]

_LOGGER = logging.getLogger(__name__)


@dataclass
class SimState:
    """State of one run at step i."""

    step_index: int
    profile: AgeProfile
    current_D: float

    def time(self) -> float:
        """Return i*h."""
        return self.step_index * self.profile.h


@dataclass
class TimeSeries:
    """Per-step records of a run."""

    h: float
    step: np.ndarray
    t: np.ndarray
    D: np.ndarray
    f_boundary: np.ndarray
    y: np.ndarray
    w: np.ndarray
    ratio_min: np.ndarray
    ratio_max: np.ndarray
    profiles: Optional[np.ndarray] = None

    def __len__(self) -> int:
        """Return the number of recorded steps."""
        return int(self.step.size)

    def column(self, name: str) -> np.ndarray:
        """Return one CSV column by name."""
        return getattr(self, name)

    def rows(self) -> Iterator[tuple]:
        """Yield records in CSV column order."""
        columns = [self.column(name) for name in CSV_COLUMNS]
        for index in range(len(self)):
            yield tuple(column[index] for column in columns)

    def profile_at(self, index: int) -> AgeProfile:
        """Return the recorded profile of row ``index``."""
        if self.profiles is None:
            raise ValueError("run was made without keep_profiles")
        return AgeProfile(self.profiles[index], self.h)


@dataclass
class _Recorder:
    """Collects rows while a run marches."""

    keep_profiles: bool
    data: Dict[str, List[float]] = field(default_factory=dict)
    profiles: List[np.ndarray] = field(default_factory=list)

    def add(self, profile: AgeProfile, **values: float) -> None:
        for name, value in values.items():
            self.data.setdefault(name, []).append(value)
        if self.keep_profiles:
            self.profiles.append(np.array(profile.values))

    def build(self, h: float) -> TimeSeries:
        columns = {name: np.asarray(self.data[name]) for name in CSV_COLUMNS}
        columns["step"] = columns["step"].astype(int)
        return TimeSeries(
            h=h,
            profiles=np.vstack(self.profiles) if self.keep_profiles else None,
            **columns,
        )


def transport_step(state: SimState, params: ModelParams) -> AgeProfile:
    """Shift the profile one node along the characteristics.

    Node 0 is left as NaN until the renewal condition fills it.
    """
    old = state.profile.values
    h = state.profile.h
    if params.mu.kind == KIND_CONSTANT:
        decay = np.exp(-(params.mu.scale + state.current_D) * h)
    else:
        mortality = params.mu.cell_integrals(h, state.profile.N)
        decay = np.exp(-mortality - state.current_D * h)
    values = np.empty_like(old)
    values[0] = np.nan
    values[1:] = old[:-1] * decay
    return AgeProfile(values, h)


def renewal_boundary(profile: AgeProfile, params: ModelParams) -> float:
    """Return the newborn density, the integral of k against the profile."""
    return integrate_profile(profile, params.k)


def measured_output(profile: AgeProfile, params: ModelParams) -> float:
    """Return y, the integral of p against the profile."""
    return integrate_profile(profile, params.p)


def _check_profile(profile: AgeProfile, step: int) -> None:
    values = profile.values
    bad = np.flatnonzero(~(np.isfinite(values) & (values > 0)))
    if bad.size:
        node = int(bad[0])
        _LOGGER.error(
            "Non-positive density %s at step %s node %s", values[node], step, node
        )
        raise NonPositiveProfile("profile lost positivity", step=step, node=node)


def _renew(profile: AgeProfile, params: ModelParams, step: int) -> AgeProfile:
    try:
        boundary = renewal_boundary(profile, params)
    except NonPositiveProfile as err:
        _LOGGER.error("Renewal failed at step %s: %s", step, err)
        raise NonPositiveProfile(
            "profile lost positivity", step=step, node=err.node
        ) from err
    renewed = profile.with_boundary(boundary)
    _check_profile(renewed, step)
    return renewed


def _march(
    params: ModelParams,
    f0: AgeProfile,
    t_end: float,
    rate_for_step: Callable[[int, float, float], float],
    f_star: Optional[AgeProfile],
    stride: int,
    keep_profiles: bool,
) -> TimeSeries:
    """Run the four-stage loop with rates supplied by ``rate_for_step``."""
    steps = grid_steps(t_end, f0.h, "t_end")
    recorder = _Recorder(keep_profiles=keep_profiles)
    profile = f0

    for step in range(steps + 1):
        profile = _renew(profile, params, step)
        boundary = float(profile.values[0])
        output = measured_output(profile, params)
        rate = rate_for_step(step, boundary, output)

        if step % stride == 0 or step == steps:
            if f_star is not None:
                low, high = ratio_envelope(profile, f_star)
                deviation = max(math.log(high), -math.log(low))
            else:
                low = high = deviation = np.nan
            recorder.add(
                profile,
                step=step,
                t=step * f0.h,
                D=rate,
                f_boundary=boundary,
                y=output,
                w=float(deviation),
                ratio_min=low,
                ratio_max=high,
            )

        if step < steps:
            state = SimState(step_index=step, profile=profile, current_D=rate)
            profile = transport_step(state, params)

    return recorder.build(f0.h)


def run_simulation(
    params: ModelParams,
    eq: Equilibrium,
    controller: ControllerSpec,
    f0: AgeProfile,
    t_end: float,
    stride: int = DEFAULT_STRIDE,
    keep_profiles: bool = False,
) -> TimeSeries:
    """Run the sampled-data closed loop from f0 up to t_end."""
    h = params.h
    grid_steps(controller.T, h, "T")
    state = HoldState(current_D=controller.clamp(controller.effective_d_star))
    saturated = []

    def rate_for_step(step: int, boundary: float, output: float) -> float:
        sample = None
        if is_sampling_step(step, h, controller.T):
            measurement = measurement_for(controller, boundary, output)
            sample = sample_control(measurement, controller)
            saturated.append(sample in (controller.D_min, controller.D_max))
            _LOGGER.debug("Step %s sampled D=%s from %s", step, sample, measurement)
        return hold(state, step, h, controller.T, sample)

    _LOGGER.info(
        "Running %s controller to t=%s (h=%s, T=%s)",
        controller.variant,
        t_end,
        h,
        controller.T,
    )
    series = _march(params, f0, t_end, rate_for_step, eq.f_star, stride, keep_profiles)
    if any(saturated):
        _LOGGER.warning(
            "Dilution rate saturated on %s of %s samples",
            sum(saturated),
            len(saturated),
        )
    _LOGGER.info(
        "Run finished: D=%s f(t,0)=%s y=%s",
        series.D[-1],
        series.f_boundary[-1],
        series.y[-1],
    )
    return series


def run_uncontrolled(
    params: ModelParams,
    f0: AgeProfile,
    t_end: float,
    D: float = 0.0,
    eq: Optional[Equilibrium] = None,
    keep_profiles: bool = False,
) -> TimeSeries:
    """Run with a constant dilution rate, D=0 giving the undiluted system."""
    f_star = None if eq is None else eq.f_star

    def rate_for_step(step: int, boundary: float, output: float) -> float:
        return D

    return _march(params, f0, t_end, rate_for_step, f_star, 1, keep_profiles)


def open_loop(
    params: ModelParams,
    eq: Equilibrium,
    f0: AgeProfile,
    t_end: float,
    keep_profiles: bool = False,
) -> TimeSeries:
    """Run with D held at D* for all time."""
    return run_uncontrolled(params, f0, t_end, eq.d_star, eq, keep_profiles)
