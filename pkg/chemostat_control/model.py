"""Chemostat model, equilibrium family and initial conditions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .const import (
    ALIGN_TOL,
    BISECT_XTOL,
    COMPAT_TOL,
    CONF_D_MIN,
    CONF_HORIZON,
    CONF_K,
    CONF_MU,
    CONF_P,
    CONF_PERIOD,
    CONF_SCALE,
    CONF_STEP,
    DEFAULT_HORIZON,
    DEFAULT_STEP,
    KIND_CONSTANT,
    KIND_TABLE,
    KIND_TRIANGULAR,
    LOTKA_REFINE,
    POSITIVITY_REFINE,
    ROOT_MAX_ITER,
    ROOT_TOL,
)
from .exceptions import (
    ConfigValidationError,
    GridAlignmentError,
    IncompatibleBoundary,
    NoRootInBracket,
    NonPositiveProfile,
)
from .quadrature import AgeProfile, integrate_profile

_LOGGER = logging.getLogger(__name__)


def grid_steps(span: float, h: float, what: str = "span") -> int:
    """Return span/h as an integer or raise when it is off the grid."""
    ratio = span / h
    steps = int(round(ratio))
    if steps <= 0 or abs(ratio - steps) > ALIGN_TOL * max(1.0, ratio):
        raise GridAlignmentError(f"{what}/h = {ratio:.12g} is not a positive integer")
    return steps


@dataclass(frozen=True)
class AgeFunction:
    """Piecewise-linear function of age.

    constant: value ``scale`` everywhere.
    triangular: ``scale * a`` up to ``horizon/2``, then ``scale * (horizon - a)``.
    table: linear interpolation through ``points``, flat beyond the ends.
    """

    kind: str
    scale: float = 0.0
    horizon: float = 0.0
    points: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def constant(cls, value: float) -> "AgeFunction":
        """Return a constant function."""
        return cls(KIND_CONSTANT, scale=float(value))

    @classmethod
    def triangular(cls, g: float, horizon: float = DEFAULT_HORIZON) -> "AgeFunction":
        """Return the symmetric tent with apex at horizon/2 and slope g."""
        return cls(KIND_TRIANGULAR, scale=float(g), horizon=float(horizon))

    @classmethod
    def table(cls, points: Sequence[Sequence[float]]) -> "AgeFunction":
        """Return a piecewise-linear function through (age, value) pairs."""
        pairs = tuple((float(age), float(value)) for age, value in points)
        ages = [age for age, _ in pairs]
        if len(pairs) < 2 or any(b <= a for a, b in zip(ages, ages[1:])):
            raise ConfigValidationError(
                "table needs at least two points with increasing ages"
            )
        return cls(KIND_TABLE, points=pairs)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Return the ages where the slope may change."""
        if self.kind == KIND_TRIANGULAR:
            return (0.5 * self.horizon, self.horizon)
        if self.kind == KIND_TABLE:
            return tuple(age for age, _ in self.points)
        return ()

    def __call__(self, ages: np.ndarray) -> np.ndarray:
        """Evaluate at the given ages."""
        ages = np.asarray(ages, dtype=float)
        if self.kind == KIND_CONSTANT:
            return np.full_like(ages, self.scale)
        if self.kind == KIND_TRIANGULAR:
            apex = 0.5 * self.horizon
            tent = np.where(ages <= apex, ages, self.horizon - ages)
            return self.scale * np.clip(tent, 0.0, None)
        xs, ys = zip(*self.points)
        return np.interp(ages, xs, ys)

    def sample(self, ages: np.ndarray, h: float) -> np.ndarray:
        """Evaluate on a grid after checking every breakpoint is a grid node."""
        top = float(ages[-1])
        for point in self.breakpoints:
            if 0.0 < point < top:
                ratio = point / h
                if abs(ratio - round(ratio)) > ALIGN_TOL * max(1.0, ratio):
                    raise GridAlignmentError(
                        f"breakpoint {point} is not on the grid with h={h}"
                    )
        return self(ages)

    def cell_integrals(self, h: float, N: int) -> np.ndarray:
        """Return the integral over each cell [jh, (j+1)h], j=0..N-1."""
        if self.kind == KIND_CONSTANT:
            return np.full(N, self.scale * h)
        nodes = self.sample(np.arange(N + 1) * h, h)
        return 0.5 * h * (nodes[:-1] + nodes[1:])

    def cumulative(self, h: float, N: int) -> np.ndarray:
        """Return the integral from 0 to each grid age."""
        if self.kind == KIND_CONSTANT:
            return self.scale * np.arange(N + 1) * h
        return np.concatenate(([0.0], np.cumsum(self.cell_integrals(h, N))))

    def to_spec(self) -> dict:
        """Return the configuration form of this function."""
        if self.kind == KIND_CONSTANT:
            return {KIND_CONSTANT: self.scale}
        if self.kind == KIND_TRIANGULAR:
            return {KIND_TRIANGULAR: {"g": self.scale}}
        return {KIND_TABLE: [list(point) for point in self.points]}


@dataclass(frozen=True)
class ModelParams:
    """The physical model together with its characteristic grid step."""

    A: float
    mu: AgeFunction
    k: AgeFunction
    p: AgeFunction
    D_min: float
    D_max: float
    T: float
    M: float = 1.0
    h: float = DEFAULT_STEP
    N: int = field(init=False)

    def __post_init__(self) -> None:
        """Check the model invariants."""
        if self.A <= 0:
            raise ConfigValidationError("must be positive", CONF_HORIZON)
        if self.T <= 0:
            raise ConfigValidationError("must be positive", CONF_PERIOD)
        if self.M <= 0:
            raise ConfigValidationError("must be positive", CONF_SCALE)
        if self.h <= 0:
            raise ConfigValidationError("must be positive", CONF_STEP)
        if not 0 < self.D_min < self.D_max:
            raise ConfigValidationError("need 0 < D_min < D_max", CONF_D_MIN)
        object.__setattr__(self, "N", grid_steps(self.A, self.h, "A"))
        grid_steps(self.T, self.h, "T")

        ages = self.ages
        for name, func in ((CONF_MU, self.mu), (CONF_K, self.k), (CONF_P, self.p)):
            if func.kind == KIND_TRIANGULAR and not math.isclose(
                func.horizon, self.A, rel_tol=ALIGN_TOL
            ):
                raise ConfigValidationError(
                    f"triangular horizon {func.horizon} must equal A={self.A}", name
                )
            if np.any(func.sample(ages, self.h) < 0):
                raise ConfigValidationError("must be non-negative", name)
        if not np.sum(self.k.cell_integrals(self.h, self.N)) > 0:
            raise ConfigValidationError("integral must be positive", CONF_K)
        if not np.sum(self.p.cell_integrals(self.h, self.N)) > 0:
            raise ConfigValidationError("integral must be positive", CONF_P)

    @property
    def ages(self) -> np.ndarray:
        """Return the grid ages j*h."""
        return np.arange(self.N + 1) * self.h

    @property
    def steps_per_period(self) -> int:
        """Return T/h."""
        return grid_steps(self.T, self.h, "T")

    def with_step(self, h: float) -> "ModelParams":
        """Return the same model on a grid with step h."""
        return replace(self, h=h)

    def survival(self, h: Optional[float] = None) -> np.ndarray:
        """Return exp(-integral of mu) at the grid ages for step h."""
        h = self.h if h is None else h
        N = grid_steps(self.A, h, "A")
        return np.exp(-self.mu.cumulative(h, N))


@dataclass(frozen=True)
class Equilibrium:
    """Equilibrium of the chemostat at dilution rate d_star."""

    d_star: float
    f_star: AgeProfile
    y_star: float
    beta: float


@dataclass(frozen=True)
class InitialFamily:
    """Initial profile b0 - b1*a + c*exp(-theta*a)."""

    b0: float
    c: float
    theta: float
    b1: float

    def __call__(self, ages: np.ndarray) -> np.ndarray:
        """Evaluate the profile."""
        ages = np.asarray(ages, dtype=float)
        return self.b0 - self.b1 * ages + self.c * np.exp(-self.theta * ages)


def equilibrium_profile(
    d_star: float,
    params: ModelParams,
    h: Optional[float] = None,
    scale: Optional[float] = None,
) -> AgeProfile:
    """Return M*exp(-d_star*a - integral of mu) on the grid with step h.

    ``scale`` overrides M, so scale=1 gives the unit equilibrium shape.
    """
    h = params.h if h is None else h
    N = grid_steps(params.A, h, "A")
    level = params.M if scale is None else scale
    values = level * np.exp(-d_star * np.arange(N + 1) * h) * params.survival(h)
    return AgeProfile(values, h)


def lotka_sharpe_residual(
    D: float, params: ModelParams, refine: int = LOTKA_REFINE
) -> float:
    """Return 1 - integral of k(a)*exp(-D*a - integral of mu)."""
    h = params.h / refine
    unit = equilibrium_profile(D, params, h, scale=1.0)
    return 1.0 - integrate_profile(unit, params.k)


def lotka_sharpe_moments(params: ModelParams) -> Tuple[float, float]:
    """Return the integrals of k(a) and a*k(a) over [0, A].

    Both are exact for a piecewise-linear k whose breakpoints are grid nodes.
    """
    h = params.h
    ages = params.ages
    nodes = params.k.sample(ages, h)
    left, right = nodes[:-1], nodes[1:]
    a_left, a_right = ages[:-1], ages[1:]
    mass = 0.5 * h * np.sum(left + right)
    first = (h / 6.0) * np.sum(
        left * (2 * a_left + a_right) + right * (a_left + 2 * a_right)
    )
    return float(mass), float(first)


def solve_d_star(params: ModelParams) -> Equilibrium:
    """Solve the Lotka-Sharpe equation by bisection and build the equilibrium."""
    low = lotka_sharpe_residual(params.D_min, params)
    high = lotka_sharpe_residual(params.D_max, params)
    if not low < 0.0 < high:
        raise NoRootInBracket(
            f"residual does not change sign on [{params.D_min}, {params.D_max}]: "
            f"{low:.6g}, {high:.6g}"
        )

    d_star, result = bisect(
        lotka_sharpe_residual,
        params.D_min,
        params.D_max,
        args=(params,),
        xtol=BISECT_XTOL,
        maxiter=ROOT_MAX_ITER,
        full_output=True,
        disp=False,
    )
    residual = lotka_sharpe_residual(d_star, params)
    _LOGGER.debug(
        "Bisection finished after %s iterations: D*=%s residual=%s",
        result.iterations,
        d_star,
        residual,
    )
    if abs(residual) > ROOT_TOL:
        raise NoRootInBracket(
            f"bisection stopped at D={d_star} with residual {residual:.3g}"
        )

    f_star = equilibrium_profile(d_star, params)
    unit = equilibrium_profile(d_star, params, scale=1.0)
    beta = integrate_profile(unit, params.p)
    _LOGGER.info("Equilibrium D*=%.10f y*=%.8f", d_star, params.M * beta)
    return Equilibrium(d_star=d_star, f_star=f_star, y_star=params.M * beta, beta=beta)


def triangular_birth_scale(
    mu_const: float, d_star: float, horizon: float = DEFAULT_HORIZON
) -> float:
    """Return the tent slope g giving unit Lotka-Sharpe mass at d_star.

    The tent integrates exp(-s*a) to ((1 - exp(-s*H)) / s)**2 with H its
    half-width and s = mu + D*.
    """
    half = 0.5 * horizon
    rate = mu_const + d_star
    if rate == 0:
        return 1.0 / (half * half)
    return float((rate / -np.expm1(-rate * half)) ** 2)


def _exponential_moment(theta: float, params: ModelParams) -> float:
    """Return the integral of k(a)*exp(-theta*a)."""
    tilt = AgeProfile(np.exp(-theta * params.ages), params.h)
    return integrate_profile(tilt, params.k)


def initial_family(
    b0: float, c: float, theta: float, params: ModelParams
) -> InitialFamily:
    """Return the initial family with b1 fixed by the renewal condition."""
    if params.k.kind == KIND_TRIANGULAR:
        g = params.k.scale
        half = 0.5 * params.k.horizon
        mass = g * half**2
        first = g * half**3
        tilted = g * np.expm1(-theta * half) ** 2 / theta**2
    else:
        mass, first = lotka_sharpe_moments(params)
        tilted = _exponential_moment(theta, params)
    b1 = (b0 * mass + c * tilted - b0 - c) / first
    return InitialFamily(b0=b0, c=c, theta=theta, b1=float(b1))


def make_initial_profile(
    b0: float, c: float, theta: float, params: ModelParams
) -> AgeProfile:
    """Sample the compatible initial family on the grid and validate it."""
    if min(b0, c, theta) <= 0:
        raise ConfigValidationError("b0, c and theta must be positive", "initial")
    family = initial_family(b0, c, theta, params)

    fine = np.linspace(0.0, params.A, POSITIVITY_REFINE * params.N + 1)
    values = family(params.ages)
    if np.min(family(fine)) <= 0:
        node = int(np.argmin(values))
        raise NonPositiveProfile(
            f"initial profile is not positive (b1={family.b1:.8g})", node=node
        )

    mass, first = lotka_sharpe_moments(params)
    births = b0 * mass - family.b1 * first + c * _exponential_moment(theta, params)
    gap = abs(values[0] - births)
    if gap > COMPAT_TOL * values[0]:
        raise IncompatibleBoundary(
            f"f0(0)={values[0]:.12g} but renewal gives {births:.12g}"
        )
    _LOGGER.debug("Initial family b1=%s compatibility gap=%s", family.b1, gap)
    return AgeProfile(values, params.h)


def profile_from_table(
    points: Sequence[Sequence[float]], params: ModelParams
) -> AgeProfile:
    """Interpolate an explicit initial table and regenerate its boundary node."""
    values = AgeFunction.table(points)(params.ages)
    profile = AgeProfile(values, params.h)
    births = integrate_profile(profile, params.k)
    if abs(values[0] - births) > COMPAT_TOL * max(abs(births), 1.0):
        _LOGGER.warning(
            "Initial table has f0(0)=%s, replacing it with the renewal value %s",
            values[0],
            births,
        )
    return profile.with_boundary(births)
