"""Exponential-interpolation quadrature on a uniform age grid.

Every rule integrates the exponential C*exp(sigma*a) drawn through two
neighbouring grid samples, so profiles that are exponential on each cell are
integrated exactly. The first two cells are covered by extrapolating the
exponential through the nodes at h and 2h, which means no rule ever reads
the boundary node a=0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from .const import (
    ALIGN_TOL,
    BRANCH_TOL,
    KIND_CONSTANT,
    KIND_TRIANGULAR,
    SERIES_TOL,
)
from .exceptions import GridAlignmentError, NonPositiveProfile, NonPositiveSample

if TYPE_CHECKING:
    from .model import AgeFunction

_LOGGER = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Taylor coefficients of the moment factors, used where |ell| < SERIES_TOL.
_MOMENT_SERIES = (1 / 2, 1 / 3, 1 / 8, 1 / 30, 1 / 144, 1 / 840)
_EXTRAPOLATED_SERIES = (1 / 2, -1 / 6, 1 / 24, -1 / 120, 1 / 720, -1 / 5040)


@dataclass(frozen=True)
class AgeProfile:
    """Density sampled at ages j*h, j=0..N."""

    values: np.ndarray
    h: float
    N: int = field(init=False)

    def __post_init__(self) -> None:
        """Freeze the sample array and derive the cell count."""
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise GridAlignmentError("an age profile needs at least three nodes")
        if self.h <= 0:
            raise GridAlignmentError(f"grid step must be positive, got {self.h}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "N", values.size - 1)

    @property
    def A(self) -> float:
        """Return the age horizon N*h."""
        return self.N * self.h

    @property
    def ages(self) -> np.ndarray:
        """Return the grid ages."""
        return np.arange(self.N + 1) * self.h

    def scaled(self, factor: float) -> "AgeProfile":
        """Return the profile multiplied by a constant."""
        return AgeProfile(self.values * factor, self.h)

    def with_boundary(self, value: float) -> "AgeProfile":
        """Return a copy with node 0 replaced."""
        values = self.values.copy()
        values[0] = value
        return AgeProfile(values, self.h)


@dataclass(frozen=True)
class CellSample:
    """Endpoint samples of one grid cell [j*h, (j+1)*h]."""

    f_left: float
    f_right: float
    j: int
    h: float

    def __post_init__(self) -> None:
        """Validate the samples."""
        if not (self.f_left > 0 and self.f_right > 0):
            raise NonPositiveSample(
                f"cell {self.j} has non-positive endpoint "
                f"({self.f_left}, {self.f_right})"
            )
        if self.h <= 0:
            raise NonPositiveSample(f"cell {self.j} has non-positive step {self.h}")


def _check_positive(*samples: ArrayLike) -> None:
    """Raise when any sample is not strictly positive."""
    for sample in samples:
        if not np.all(np.asarray(sample) > 0):
            raise NonPositiveSample("quadrature samples must be strictly positive")


def _log_ratio(f_left: ArrayLike, f_right: ArrayLike) -> tuple:
    """Return (ln(f_right/f_left), equal-branch mask, safe divisor)."""
    f_left = np.asarray(f_left, dtype=float)
    f_right = np.asarray(f_right, dtype=float)
    ell = np.log1p((f_right - f_left) / f_left)
    equal = np.abs(ell) < BRANCH_TOL
    return ell, equal, np.where(equal, 1.0, ell)


def _series(ell: np.ndarray, coefficients: tuple) -> np.ndarray:
    """Evaluate a power series in ell by Horner's rule."""
    total = np.zeros_like(ell)
    for coefficient in reversed(coefficients):
        total = total * ell + coefficient
    return total


def _moment_factor(ell: np.ndarray) -> np.ndarray:
    """Return the integral of t*exp(ell*t) over [0, 1]."""
    small = np.abs(ell) < SERIES_TOL
    safe = np.where(small, 1.0, ell)
    closed = (safe * np.exp(safe) - np.expm1(safe)) / (safe * safe)
    return np.where(small, _series(ell, _MOMENT_SERIES), closed)


def _extrapolated_moment_factor(x: np.ndarray) -> np.ndarray:
    """Return (x + expm1(-x)) / x**2."""
    small = np.abs(x) < SERIES_TOL
    safe = np.where(small, 1.0, x)
    closed = (safe + np.expm1(-safe)) / (safe * safe)
    return np.where(small, _series(x, _EXTRAPOLATED_SERIES), closed)


def _plain(f_left: ArrayLike, f_right: ArrayLike, h: float) -> np.ndarray:
    _, equal, ell = _log_ratio(f_left, f_right)
    diff = np.asarray(f_right) - np.asarray(f_left)
    return np.where(equal, h * np.asarray(f_left), h * diff / ell)


def _age_weighted(
    f_left: ArrayLike, f_right: ArrayLike, j: ArrayLike, h: float
) -> np.ndarray:
    ell, equal, _ = _log_ratio(f_left, f_right)
    f_left = np.asarray(f_left)
    j = np.asarray(j, dtype=float)
    moment = h * h * f_left * _moment_factor(ell)
    fitted = j * h * _plain(f_left, f_right, h) + moment
    return np.where(equal, 0.5 * (2.0 * j + 1.0) * h * h * f_left, fitted)


def _reflected(
    f_left: ArrayLike, f_right: ArrayLike, j: ArrayLike, h: float, reflection: float
) -> np.ndarray:
    ell, equal, _ = _log_ratio(f_left, f_right)
    f_left = np.asarray(f_left)
    j = np.asarray(j, dtype=float)
    moment = h * h * f_left * _moment_factor(ell)
    fitted = (reflection - j * h) * _plain(f_left, f_right, h) - moment
    flat = (reflection - 0.5 * (2.0 * j + 1.0) * h) * h * f_left
    return np.where(equal, flat, fitted)


def _first_plain(f_h: ArrayLike, f_2h: ArrayLike, h: float) -> np.ndarray:
    _, equal, ell = _log_ratio(f_h, f_2h)
    f_h = np.asarray(f_h)
    f_2h = np.asarray(f_2h)
    return np.where(equal, 2.0 * h * f_h, -h * f_2h * np.expm1(-2.0 * ell) / ell)


def _first_age_weighted(f_h: ArrayLike, f_2h: ArrayLike, h: float) -> np.ndarray:
    ell, equal, _ = _log_ratio(f_h, f_2h)
    f_2h = np.asarray(f_2h)
    fitted = 4.0 * h * h * f_2h * _extrapolated_moment_factor(2.0 * ell)
    return np.where(equal, 2.0 * h * h * f_2h, fitted)


def cell_plain(sample: CellSample) -> float:
    """Integrate the exponential interpolant over one cell."""
    return float(_plain(sample.f_left, sample.f_right, sample.h))


def first_cells_plain(f_h: float, f_2h: float, h: float) -> float:
    """Integrate over [0, 2h] the exponential through (h, f_h) and (2h, f_2h)."""
    _check_positive(f_h, f_2h)
    return float(_first_plain(f_h, f_2h, h))


def cell_age_weighted(sample: CellSample) -> float:
    """Integrate a * (exponential interpolant) over one cell."""
    return float(_age_weighted(sample.f_left, sample.f_right, sample.j, sample.h))


def first_cells_age_weighted(f_h: float, f_2h: float, h: float) -> float:
    """Integrate a * (extrapolated exponential) over [0, 2h]."""
    _check_positive(f_h, f_2h)
    return float(_first_age_weighted(f_h, f_2h, h))


def cell_reflected(sample: CellSample, reflection: float) -> float:
    """Integrate (reflection - a) * (exponential interpolant) over one cell.

    For the triangular birth modulus the reflection point is the horizon,
    where the falling half of the triangle reaches zero.
    """
    if (sample.j + 1) * sample.h > reflection * (1.0 + ALIGN_TOL):
        raise GridAlignmentError(
            f"cell {sample.j} lies beyond the reflection point {reflection}"
        )
    return float(
        _reflected(sample.f_left, sample.f_right, sample.j, sample.h, reflection)
    )


def _is_linear_over_first_cells(weights: np.ndarray) -> bool:
    """Return True when the nodal weights at 0, h, 2h lie on one line."""
    scale = max(float(np.max(np.abs(weights[:3]))), 1.0)
    return abs(weights[0] - 2.0 * weights[1] + weights[2]) <= ALIGN_TOL * scale


def _integrate_table(values: np.ndarray, weights: np.ndarray, h: float) -> float:
    """Integrate a positive profile against a piecewise-linear nodal weight."""
    N = values.size - 1
    j = np.arange(2, N)
    f_left = values[2:N]
    f_right = values[3 : N + 1]
    slope = (weights[3 : N + 1] - weights[2:N]) / h
    offset = weights[2:N] - slope * j * h
    body = offset * _plain(f_left, f_right, h) + slope * _age_weighted(
        f_left, f_right, j, h
    )

    f_h, f_2h = values[1], values[2]
    if _is_linear_over_first_cells(weights):
        slope0 = (weights[2] - weights[0]) / (2.0 * h)
        head = weights[0] * _first_plain(f_h, f_2h, h) + slope0 * _first_age_weighted(
            f_h, f_2h, h
        )
    else:
        # Kink at a=h: split [0, 2h] at the node, extrapolating to a virtual a=0.
        virtual = f_h * f_h / f_2h
        head = 0.0
        for cell, (left, right) in enumerate(((virtual, f_h), (f_h, f_2h))):
            slope_c = (weights[cell + 1] - weights[cell]) / h
            offset_c = weights[cell] - slope_c * cell * h
            head += offset_c * _plain(left, right, h) + slope_c * _age_weighted(
                left, right, cell, h
            )
    return float(head + np.sum(body))


def _reaches_horizon(weight: "AgeFunction", A: float) -> bool:
    """Return True when a triangular weight falls to zero exactly at age A."""
    return abs(weight.horizon - A) <= ALIGN_TOL * max(1.0, A)


def integrate_profile(
    profile: AgeProfile, weight: Optional["AgeFunction"] = None
) -> float:
    """Integrate a profile over [0, A], optionally against an age weight.

    The boundary node is never read. Constant weights scale the plain rules,
    a triangular weight ending at A uses age-weighted cells on its rising half
    and reflected cells on its falling half, and any other piecewise-linear
    weight is split cell by cell into constant and age-proportional parts.
    """
    values = profile.values
    interior = values[1:]
    bad = np.flatnonzero(~(np.isfinite(interior) & (interior > 0)))
    if bad.size:
        raise NonPositiveProfile(
            "cannot integrate a profile with non-positive interior nodes",
            node=int(bad[0]) + 1,
        )

    h = profile.h
    N = profile.N

    if weight is None or weight.kind == KIND_CONSTANT:
        level = 1.0 if weight is None else weight.scale
        body = _plain(values[2:N], values[3 : N + 1], h)
        return level * float(_first_plain(values[1], values[2], h) + np.sum(body))

    if weight.kind == KIND_TRIANGULAR and _reaches_horizon(weight, profile.A):
        apex = N // 2
        if N % 2 or apex < 2:
            raise GridAlignmentError(
                f"triangular weight needs an even cell count >= 4, got N={N}"
            )
        rising = np.arange(2, apex)
        falling = np.arange(apex, N)
        total = _first_age_weighted(values[1], values[2], h)
        total += np.sum(_age_weighted(values[rising], values[rising + 1], rising, h))
        total += np.sum(
            _reflected(values[falling], values[falling + 1], falling, h, profile.A)
        )
        return weight.scale * float(total)

    return _integrate_table(values, weight.sample(profile.ages, h), h)
