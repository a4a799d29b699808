"""Integral delay equation for the newborn density.

Along characteristics the undiluted density is z(t,a) = S(a) v(t-a), with
S the survival exp(-integral of mu), and v solves

    v(t) = integral over (0, A] of G(a) v(t-a) da,   G = k*S.

The dilution enters only as the factor exp(-integral of D), so solving for v
once and multiplying recovers any controlled run. This module marches v with
the trapezoid rule, rebuilds profiles from it, brackets it with the split
mass envelope and measures how fast exp(-D* t) v(t) settles to its limit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .const import (
    BISECT_XTOL,
    CONTRACTION_SLACK,
    DEFAULT_BIAS,
    DEFAULT_SPLIT_FRACTION,
    ENVELOPE_SLACK,
    ERGODIC_REFINE,
    MIN_FIT_SAMPLES,
    OUTPUT_FEEDBACK,
    PHI_FLOOR,
    ROOT_MAX_ITER,
)
from .control import ControllerSpec, controller_for, measurement_for
from .exceptions import (
    GridAlignmentError,
    IllPosedStep,
    NonPositiveProfile,
    SplitMassTooLarge,
)
from .metrics import theoretical_rates
from .model import (
    Equilibrium,
    ModelParams,
    equilibrium_profile,
    grid_steps,
    lotka_sharpe_residual,
    make_initial_profile,
    solve_d_star,
)
from .pde_sim import TimeSeries, run_simulation, run_uncontrolled
from .quadrature import AgeProfile

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdeProblem:
    """Kernel table, history segment and the split used by the envelope."""

    G: np.ndarray
    h: float
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delta: Optional[float] = None
    mass_scale: float = 1.0
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        """Build the trapezoid weights and validate the split."""
        kernel = np.array(self.G, dtype=float)
        if kernel.ndim != 1 or kernel.size < 3:
            raise GridAlignmentError("kernel needs at least three nodes")
        if np.any(kernel < 0) or not np.all(np.isfinite(kernel)):
            raise ValueError("kernel must be finite and non-negative")
        weights = np.full(kernel.size, self.h)
        weights[0] = weights[-1] = 0.5 * self.h
        weights *= self.mass_scale
        object.__setattr__(self, "G", kernel)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "history", np.array(self.history, dtype=float))
        if self.delta is not None and self.c >= 1.0:
            raise SplitMassTooLarge(
                f"kernel mass {self.c:.6g} on [0, {self.delta}] is not below one"
            )

    @property
    def N(self) -> int:
        """Return the number of kernel cells."""
        return self.G.size - 1

    @property
    def A(self) -> float:
        """Return the kernel horizon."""
        return self.N * self.h

    @property
    def masses(self) -> np.ndarray:
        """Return the discrete kernel masses W_m G_m."""
        return self.weights * self.G

    @property
    def L(self) -> float:
        """Return the total discrete kernel mass."""
        return float(np.sum(self.masses))

    @property
    def split_index(self) -> int:
        """Return Delta/h, with Delta defaulting to half the horizon."""
        delta = DEFAULT_SPLIT_FRACTION * self.A if self.delta is None else self.delta
        return grid_steps(delta, self.h, "Delta")

    @property
    def c(self) -> float:
        """Return the kernel mass on [0, Delta], endpoint included."""
        return float(np.sum(self.masses[: self.split_index + 1]))

    @property
    def b(self) -> float:
        """Return (L - c)/(1 - c)."""
        return (self.L - self.c) / (1.0 - self.c)

    @property
    def h_env(self) -> float:
        """Return min(Delta, A - Delta)."""
        delta = self.split_index * self.h
        return min(delta, self.A - delta)

    def with_history(self, history: Sequence[float]) -> "IdeProblem":
        """Return the problem with v(-m*h), m=1..N, replaced."""
        history = np.asarray(history, dtype=float)
        if history.size != self.N:
            raise GridAlignmentError(
                f"history needs {self.N} values, got {history.size}"
            )
        return replace(self, history=history)


@dataclass(frozen=True)
class IdeSeries:
    """Solution v(n*h), n=0..steps, with its history v(-m*h), m=1..N."""

    h: float
    v: np.ndarray
    history: np.ndarray

    @property
    def t(self) -> np.ndarray:
        """Return the solution times."""
        return np.arange(self.v.size) * self.h

    def extended(self) -> np.ndarray:
        """Return v from t=-N*h up to the last solution time."""
        return np.concatenate((self.history[::-1], self.v))


@dataclass(frozen=True)
class ErgodicDiagnostics:
    """Deviation of exp(-D* t) v(t) from its limit and the fitted decay."""

    P_value: float
    t: np.ndarray
    phi: np.ndarray
    eps_fit: float
    K_fit: float
    degenerate: bool = False


@dataclass(frozen=True)
class ContractionReport:
    """Per-period log errors of a closed loop and the contraction margins."""

    x: np.ndarray
    u: np.ndarray
    delta: float
    margin: np.ndarray

    @property
    def holds(self) -> bool:
        """Return True when every period contracts within slack."""
        return bool(np.all(self.margin >= -CONTRACTION_SLACK))


@dataclass(frozen=True)
class CrossValidation:
    """Gaps between the IDE route and the direct simulation per grid step."""

    steps: Tuple[float, ...]
    boundary_gaps: Tuple[float, ...]
    profile_gaps: Tuple[float, ...]
    order: float


def history_from_profile(f0: AgeProfile, params: ModelParams) -> np.ndarray:
    """Return v(-a) = f0(a)/S(a) at a = m*h, m=1..N."""
    return f0.values[1:] / params.survival(f0.h)[1:]


def kernel_from_model(
    params: ModelParams,
    eq: Optional[Equilibrium] = None,
    delta: Optional[float] = None,
    discount: float = 0.0,
    history: Optional[Sequence[float]] = None,
) -> IdeProblem:
    """Tabulate G(a) = k(a) S(a) exp(-discount*a) on the model grid.

    With an equilibrium the trapezoid weights are rescaled so the discrete
    kernel has the same Lotka-Sharpe mass at D* as the exact one.
    """
    ages = params.ages
    kernel = params.k.sample(ages, params.h) * params.survival()
    kernel *= np.exp(-discount * ages)

    scale = 1.0
    if eq is not None:
        plain = IdeProblem(kernel, params.h)
        tilt = np.exp(-(eq.d_star - discount) * ages)
        scale = (1.0 - lotka_sharpe_residual(eq.d_star, params)) / float(
            np.sum(plain.masses * tilt)
        )
        _LOGGER.debug("Kernel mass correction %s", scale)

    prob = IdeProblem(kernel, params.h, delta=delta, mass_scale=scale)
    if history is not None:
        prob = prob.with_history(history)
    return prob


def solve_ide(prob: IdeProblem, t_end: float, dt: Optional[float] = None) -> IdeSeries:
    """March v with the trapezoid rule, solving for the a=0 term implicitly."""
    if dt is not None and abs(dt - prob.h) > 1e-12 * prob.h:
        raise GridAlignmentError(f"time step {dt} must equal the age step {prob.h}")
    if prob.history.size != prob.N:
        raise GridAlignmentError("problem has no history segment")
    masses = prob.masses
    if masses[0] >= 1.0:
        raise IllPosedStep(f"(h/2)G(0) = {masses[0]:.6g} is not below one")

    steps = grid_steps(t_end, prob.h, "t_end")
    N = prob.N
    buffer = np.empty(N + steps + 1)
    buffer[:N] = prob.history[::-1]
    lagged = masses[1:][::-1]
    implicit = 1.0 - masses[0]

    for n in range(steps + 1):
        buffer[N + n] = np.dot(lagged, buffer[n : N + n]) / implicit

    return IdeSeries(h=prob.h, v=buffer[N:].copy(), history=prob.history.copy())


def reconstruct_pde(
    series: IdeSeries,
    params: ModelParams,
    D_path: Union[float, Sequence[float]] = 0.0,
) -> np.ndarray:
    """Rebuild f(n*h, j*h) = exp(-integral of D) S(jh) v((n-j)h).

    ``D_path`` holds the rate applied on each step interval, or one constant.
    Returns an array of shape (steps+1, N+1).
    """
    steps = series.v.size - 1
    rates = np.broadcast_to(np.asarray(D_path, dtype=float), (steps,))
    exposure = np.concatenate(([0.0], np.cumsum(rates * series.h)))
    survival = params.survival(series.h)
    N = survival.size - 1
    extended = series.extended()

    lag = np.arange(steps + 1)[:, None] - np.arange(N + 1)[None, :]
    v = extended[lag + N]
    return np.exp(-exposure)[:, None] * survival[None, :] * v


def split_mass_envelope(
    prob: IdeProblem, a1: float, a2: float, t: float
) -> Tuple[float, float]:
    """Return the bracket for inf and sup of v over [t-A, t).

    a1 and a2 bound the history from below and above. The bracket assumes
    L >= 1; tilt the kernel first when it is lighter.
    """
    c = prob.c
    if c >= 1.0:
        raise SplitMassTooLarge(f"kernel mass {c:.6g} on [0, Delta] is not below one")
    if prob.L < 1.0:
        _LOGGER.debug("Envelope requested for a light kernel, L=%s", prob.L)
    growth = prob.b ** (1.0 + t / prob.h_env)
    return min(a1, a1 * growth), max(a2, a2 * growth)


def split_mass_envelope_holds(
    prob: IdeProblem, series: IdeSeries, slack: float = ENVELOPE_SLACK
) -> bool:
    """Check the envelope on every trailing window of the solution."""
    a1 = float(np.min(prob.history))
    a2 = float(np.max(prob.history))
    extended = series.extended()
    N = prob.N
    for n in range(series.v.size):
        window = extended[n : n + N]
        lower, upper = split_mass_envelope(prob, a1, a2, n * prob.h)
        if window.min() < lower - slack or window.max() > upper + slack:
            _LOGGER.warning(
                "Envelope broken at t=%s: [%s, %s] outside [%s, %s]",
                n * prob.h,
                window.min(),
                window.max(),
                lower,
                upper,
            )
            return False
    return True


def rescale_kernel(prob: IdeProblem, p: float) -> IdeProblem:
    """Return the problem for x(t) = exp(p*t) v(t)."""
    ages = np.arange(prob.N + 1) * prob.h
    return replace(
        prob,
        G=prob.G * np.exp(p * ages),
        history=prob.history * np.exp(-p * ages[1:]),
    )


def tilt_for_unit_mass(prob: IdeProblem) -> float:
    """Return p such that the kernel G(a) exp(p*a) has unit discrete mass."""
    ages = np.arange(prob.N + 1) * prob.h
    masses = prob.masses
    if masses[0] >= 1.0:
        raise IllPosedStep(f"(h/2)G(0) = {masses[0]:.6g} is not below one")
    if not np.any(masses[1:] > 0):
        raise SplitMassTooLarge("kernel has no mass away from a=0")

    def excess(p: float) -> float:
        return float(np.sum(masses * np.exp(p * ages))) - 1.0

    low, high = -1.0, 1.0
    while excess(low) > 0:
        low *= 2.0
    while excess(high) < 0:
        high *= 2.0
    return float(
        bisect(excess, low, high, xtol=BISECT_XTOL, maxiter=ROOT_MAX_ITER, disp=False)
    )


def ergodic_projection(f0: AgeProfile, params: ModelParams, eq: Equilibrium) -> float:
    """Return the limit of exp(-D* t) v(t) for the initial profile f0.

    The profile is interpolated in log space onto a finer grid, divided by
    the unit equilibrium shape E and integrated twice by the trapezoid rule,
    so P(f*) = M.
    """
    values = f0.values
    bad = np.flatnonzero(~(np.isfinite(values) & (values > 0)))
    if bad.size:
        raise NonPositiveProfile(
            "projection needs a positive profile", node=int(bad[0])
        )

    fine_h = f0.h / ERGODIC_REFINE
    shape = equilibrium_profile(eq.d_star, params, fine_h, scale=1.0).values
    ages = np.arange(shape.size) * fine_h
    spline = CubicSpline(f0.ages, np.log(values))
    ratio = np.exp(spline(ages)) / shape
    accumulated = cumulative_trapezoid(ratio, ages, initial=0.0)
    birth = params.k.sample(ages, fine_h) * shape

    value = trapezoid(birth * accumulated, ages) / trapezoid(ages * birth, ages)
    return float(value)


def discrete_projection(prob: IdeProblem, d_star: float) -> float:
    """Return the quantity the discrete recursion conserves, per unit mass.

    With a_m the kernel masses tilted by exp(-D* m h) and normalised by the
    implicit a=0 term, sum over m of (tail sum of a from m) x(-m) stays
    constant along the march, where x = exp(-D* t) v.
    """
    ages = np.arange(prob.N + 1) * prob.h
    tilted = prob.masses * np.exp(-d_star * ages)
    weights = tilted[1:] / (1.0 - tilted[0])
    tails = np.cumsum(weights[::-1])[::-1]
    scaled_history = prob.history * np.exp(d_star * ages[1:])
    return float(np.dot(tails, scaled_history) / np.dot(ages[1:] / prob.h, weights))


def phi_and_decay(
    series: IdeSeries,
    d_star: float,
    P_value: float,
    t_start: Optional[float] = None,
) -> ErgodicDiagnostics:
    """Form phi = exp(-D* t) v - P and fit its exponential decay.

    The fit window starts at t_start (the history length by default).
    Samples below the rounding floor are dropped; with too few left the
    result is flagged degenerate and eps_fit is infinite.
    """
    t = series.t
    phi = np.exp(-d_star * t) * series.v - P_value
    start = series.history.size * series.h if t_start is None else t_start
    magnitude = np.abs(phi)
    usable = (t >= start) & (magnitude >= PHI_FLOOR)

    if np.count_nonzero(usable) < MIN_FIT_SAMPLES:
        _LOGGER.warning(
            "Decay fit is degenerate: %s usable samples", np.count_nonzero(usable)
        )
        return ErgodicDiagnostics(P_value, t, phi, math.inf, 0.0, degenerate=True)

    slope, _ = np.polyfit(t[usable], np.log(magnitude[usable]), 1)
    eps = float(-slope)
    window = t >= start
    K_fit = float(np.max(magnitude[window] * np.exp(eps * t[window])))
    _LOGGER.info("Fitted decay rate %s with prefactor %s", eps, K_fit)
    return ErgodicDiagnostics(P_value, t, phi, eps, K_fit)


def phi_series_with_history(
    prob: IdeProblem, series: IdeSeries, d_star: float, P_value: float
) -> np.ndarray:
    """Return phi from t=-N*h onwards."""
    times = (np.arange(series.extended().size) - prob.N) * prob.h
    return np.exp(-d_star * times) * series.extended() - P_value


def phi_inequality_holds(
    prob: IdeProblem,
    series: IdeSeries,
    d_star: float,
    P_value: float,
    slack: float = 1e-12,
) -> bool:
    """Check |phi(t)| <= C * sum of W_m exp(-D* m h) |phi(t - m h)|.

    C is the largest kernel value.
    """
    phi = np.abs(phi_series_with_history(prob, series, d_star, P_value))
    ages = np.arange(prob.N + 1) * prob.h
    weights = prob.weights * np.exp(-d_star * ages)
    bound_constant = float(np.max(prob.G))
    N = prob.N
    scale = max(abs(P_value), 1.0)
    for n in range(series.v.size):
        recent = phi[n : n + N + 1][::-1]
        bound = bound_constant * float(np.dot(weights, recent))
        if phi[n + N] > bound + slack * scale:
            _LOGGER.warning("Phi bound broken at step %s", n)
            return False
    return True


def contraction_monitor(
    closed: TimeSeries,
    open_run: TimeSeries,
    spec: ControllerSpec,
    d_star: float,
) -> ContractionReport:
    """Measure the per-period contraction of the log error.

    x_i is the log error of the closed loop at the i-th sampling time against
    the set point its controller settles to. u_i is the per-period log growth
    of the same measurement in the open loop run at D*, started from the same
    profile.
    """
    per_period = grid_steps(spec.T, closed.h, "T")
    rows = np.flatnonzero(closed.step % per_period == 0)
    open_rows = np.flatnonzero(open_run.step % per_period == 0)
    count = min(rows.size, open_rows.size)
    rows, open_rows = rows[:count], open_rows[:count]

    closed_meas = np.array(
        [measurement_for(spec, closed.f_boundary[r], closed.y[r]) for r in rows]
    )
    open_meas = np.array(
        [
            measurement_for(spec, open_run.f_boundary[r], open_run.y[r])
            for r in open_rows
        ]
    )
    x = np.log(closed_meas) - spec.set_point - d_star * spec.T
    u = np.diff(np.log(open_meas))
    delta = theoretical_rates(spec, math.inf, d_star).delta

    ahead = np.abs(x[1:])
    now = np.abs(x[:-1])
    margin = now - np.minimum(now, 2.0 * delta) + np.abs(u) - ahead
    return ContractionReport(x=x, u=u, delta=delta, margin=margin)


def cross_validate(
    params: ModelParams,
    b0: float,
    c: float,
    theta: float,
    steps: Sequence[float] = (0.04, 0.02, 0.01),
    t_end: float = 10.0,
    variant: str = OUTPUT_FEEDBACK,
    bias: float = DEFAULT_BIAS,
) -> CrossValidation:
    """Compare the IDE route with direct simulation on a series of grids.

    For each step the boundary gap compares v with z(t,0) of the undiluted
    run, and the profile gap compares rebuilt profiles with a closed loop
    run using the same dilution path.
    """
    boundary_gaps: List[float] = []
    profile_gaps: List[float] = []
    for h in steps:
        grid = params.with_step(h)
        eq = solve_d_star(grid)
        f0 = make_initial_profile(b0, c, theta, grid)
        prob = kernel_from_model(grid, eq, history=history_from_profile(f0, grid))
        series = solve_ide(prob, t_end)

        undiluted = run_uncontrolled(grid, f0, t_end)
        boundary_gaps.append(
            float(
                np.max(
                    np.abs(series.v - undiluted.f_boundary) / undiluted.f_boundary
                )
            )
        )

        spec = controller_for(variant, grid, eq, bias=bias)
        closed = run_simulation(grid, eq, spec, f0, t_end, keep_profiles=True)
        rebuilt = reconstruct_pde(series, grid, closed.D[:-1])
        profile_gaps.append(
            float(np.max(np.abs(rebuilt - closed.profiles) / closed.profiles))
        )
        _LOGGER.info(
            "h=%s boundary gap %s profile gap %s",
            h,
            boundary_gaps[-1],
            profile_gaps[-1],
        )

    order = float(np.polyfit(np.log(steps), np.log(profile_gaps), 1)[0])
    return CrossValidation(
        steps=tuple(steps),
        boundary_gaps=tuple(boundary_gaps),
        profile_gaps=tuple(profile_gaps),
        order=order,
    )
