"""Sampled-data dilution feedback with zero-order hold."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .const import (
    DEFAULT_BIAS,
    NEWBORN_FEEDBACK,
    OPEN_LOOP,
    OUTPUT_FEEDBACK,
    VARIANTS,
)
from .exceptions import ConfigValidationError, NonPositiveMeasurement
from .model import Equilibrium, ModelParams, grid_steps

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerSpec:
    """Feedback law D = clamp(d_star_used + ln(measurement/reference)/T).

    The newborn variant measures f(t,0) against f*(0), the output variant
    measures y(t) against y*. ``d_star_used`` may be biased away from the
    true D* and need not lie inside the clamps.
    """

    variant: str
    d_star_used: float
    reference: float
    T: float
    D_min: float
    D_max: float
    log_reference: float = field(default=float("nan"))
    reference_shift: float = 0.0

    def __post_init__(self) -> None:
        """Validate and cache ln(reference)."""
        if self.variant not in VARIANTS:
            raise ConfigValidationError(f"unknown variant {self.variant}", "variant")
        if not self.D_min < self.D_max:
            raise ConfigValidationError("need D_min < D_max", "D_min")
        if self.T <= 0:
            raise ConfigValidationError("must be positive", "T")
        if not self.reference > 0:
            raise NonPositiveMeasurement(f"reference {self.reference} is not positive")
        if math.isnan(self.log_reference):
            object.__setattr__(self, "log_reference", math.log(self.reference))

    @property
    def effective_d_star(self) -> float:
        """Return the D* the law acts with once the reference shift is folded in."""
        return self.d_star_used - self.reference_shift

    @property
    def shifted_reference(self) -> float:
        """Return reference*exp(reference_shift*T), for reporting."""
        return self.reference * math.exp(self.reference_shift * self.T)

    @property
    def set_point(self) -> float:
        """Return ln(reference) - effective_d_star*T, the law's only offset."""
        return self.log_reference - self.effective_d_star * self.T

    def clamp(self, rate: float) -> float:
        """Clip a rate to [D_min, D_max]."""
        return min(self.D_max, max(self.D_min, rate))

    def with_reference_shift(self, amount: float) -> "ControllerSpec":
        """Return the spec with its reference multiplied by exp(amount*T).

        The shift is carried as a rate so that the result acts exactly like a
        controller whose D* is biased by -amount.
        """
        return replace(self, reference_shift=self.reference_shift + amount)


@dataclass
class HoldState:
    """Held dilution rate of one run."""

    current_D: float
    last_sample_step: int = -1


def sample_control(measurement: float, spec: ControllerSpec) -> float:
    """Return the clamped dilution rate for one sample."""
    if spec.variant == OPEN_LOOP:
        return spec.clamp(spec.effective_d_star)
    if not measurement > 0:
        raise NonPositiveMeasurement(f"measurement {measurement} is not positive")

    raw = (math.log(measurement) - spec.set_point) / spec.T
    rate = spec.clamp(raw)
    if rate != raw:
        _LOGGER.debug("Dilution rate %s clamped to %s", raw, rate)
    return rate


def is_sampling_step(step: int, h: float, T: float) -> bool:
    """Return True when step*h/T is an integer."""
    return step % grid_steps(T, h, "T") == 0


def hold(
    state: HoldState, step: int, h: float, T: float, new_sample: Optional[float] = None
) -> float:
    """Apply the zero-order hold and return the rate for this step."""
    if is_sampling_step(step, h, T):
        if new_sample is None:
            raise ValueError(f"step {step} is a sampling step but no sample was given")
        state.current_D = new_sample
        state.last_sample_step = step
    return state.current_D


def measurement_for(spec: ControllerSpec, f_boundary: float, y: float) -> float:
    """Pick the quantity the controller variant reads."""
    if spec.variant == NEWBORN_FEEDBACK:
        return f_boundary
    if spec.variant == OUTPUT_FEEDBACK:
        return y
    return spec.reference


def controller_for(
    variant: str,
    params: ModelParams,
    eq: Equilibrium,
    d_star_used: Optional[float] = None,
    bias: float = DEFAULT_BIAS,
    T: Optional[float] = None,
) -> ControllerSpec:
    """Build the controller a variant needs around an equilibrium.

    ``bias`` multiplies the D* the controller uses, which defaults to the
    solved one.
    """
    base = eq.d_star if d_star_used is None else d_star_used
    reference = eq.f_star.values[0] if variant == NEWBORN_FEEDBACK else eq.y_star
    return ControllerSpec(
        variant=variant,
        d_star_used=base * bias,
        reference=float(reference),
        T=params.T if T is None else T,
        D_min=params.D_min,
        D_max=params.D_max,
    )
