"""Stability functionals, ratio envelopes and rate constants."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .const import ENVELOPE_SLACK, MIN_FIT_SAMPLES, PHI_FLOOR
from .control import ControllerSpec
from .exceptions import DegenerateFit, DegenerateMargin, NonPositiveProfile
from .quadrature import AgeProfile

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TheoreticalRates:
    """Per-period margin and the decay rate it guarantees."""

    delta: float
    delta_tilde: float
    sigma: float


def _ratios(profile: AgeProfile, f_star: AgeProfile) -> np.ndarray:
    values = profile.values
    bad = np.flatnonzero(~(np.isfinite(values) & (values > 0)))
    if bad.size:
        raise NonPositiveProfile("profile has non-positive nodes", node=int(bad[0]))
    return values / f_star.values


def ratio_envelope(profile: AgeProfile, f_star: AgeProfile) -> Tuple[float, float]:
    """Return the node-wise min and max of f/f*."""
    ratios = _ratios(profile, f_star)
    return float(np.min(ratios)), float(np.max(ratios))


def log_deviation(profile: AgeProfile, f_star: AgeProfile) -> float:
    """Return max over nodes of |ln(f/f*)|."""
    low, high = ratio_envelope(profile, f_star)
    return max(math.log(high), -math.log(low))


def theoretical_rates(
    spec: ControllerSpec, eps: float, d_star: Optional[float] = None
) -> TheoreticalRates:
    """Return delta, min(delta, eps*T) and sigma = delta_tilde/(4T).

    ``d_star`` is the true equilibrium rate; it defaults to the rate the
    controller uses.
    """
    d_star = spec.effective_d_star if d_star is None else d_star
    if not spec.D_min < d_star < spec.D_max:
        raise DegenerateMargin(
            f"D*={d_star} is not inside ({spec.D_min}, {spec.D_max})"
        )
    if not eps > 0:
        raise DegenerateMargin(f"decay rate {eps} is not positive")
    delta = 0.5 * min((spec.D_max - d_star) * spec.T, (d_star - spec.D_min) * spec.T)
    delta_tilde = min(delta, eps * spec.T)
    return TheoreticalRates(
        delta=delta, delta_tilde=delta_tilde, sigma=delta_tilde / (4.0 * spec.T)
    )


def fit_decay_rate(w: np.ndarray, t: np.ndarray, t_start: float = 0.0) -> float:
    """Return the negated least-squares slope of ln w on t >= t_start."""
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    usable = (t >= t_start) & np.isfinite(w) & (w > PHI_FLOOR)
    if np.count_nonzero(usable) < MIN_FIT_SAMPLES:
        raise DegenerateFit(
            f"only {np.count_nonzero(usable)} usable samples after t={t_start}"
        )
    slope, _ = np.polyfit(t[usable], np.log(w[usable]), 1)
    return float(-slope)


def envelope_constant(w: np.ndarray, t: np.ndarray, sigma: float) -> float:
    """Return the smallest kappa with w <= kappa*exp(-sigma*t) on the samples."""
    return float(np.max(np.asarray(w) * np.exp(sigma * np.asarray(t))))


def envelope_holds(
    w: np.ndarray,
    t: np.ndarray,
    sigma: float,
    kappa: float,
    slack: float = ENVELOPE_SLACK,
) -> bool:
    """Return True when w(t) <= kappa*exp(-sigma*t) + slack pointwise."""
    bound = kappa * np.exp(-sigma * np.asarray(t)) + slack
    return bool(np.all(np.asarray(w) <= bound))
