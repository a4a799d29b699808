"""Provide diagnostics for Chemostat Control runs."""
from __future__ import annotations

import logging
import math
from typing import Any, Dict, Optional

import numpy as np

from .config_flow import RunConfig
from .const import (
    ATTR_BETA,
    ATTR_D_STAR,
    ATTR_DECAY_RATE,
    ATTR_DEGENERATE,
    ATTR_FINAL_BOUNDARY,
    ATTR_FINAL_D,
    ATTR_FINAL_W,
    ATTR_FINAL_Y,
    ATTR_MAX_LOG_RATIO,
    ATTR_STEPS,
    ATTR_Y_STAR,
    CONF_B0,
    CONF_C,
    CONF_INITIAL,
    CONF_THETA,
    OPEN_LOOP,
)
from .exceptions import ChemostatError, DegenerateFit, DegenerateMargin
from .ide import (
    contraction_monitor,
    cross_validate,
    discrete_projection,
    ergodic_projection,
    history_from_profile,
    kernel_from_model,
    phi_and_decay,
    phi_inequality_holds,
    rescale_kernel,
    solve_ide,
    split_mass_envelope_holds,
)
from .metrics import (
    envelope_constant,
    envelope_holds,
    fit_decay_rate,
    theoretical_rates,
)
from .pde_sim import TimeSeries, open_loop, run_simulation

_LOGGER = logging.getLogger(__name__)

IDE_CHECK_T_END = 20.0
CROSS_CHECK_T_END = 10.0


def summary_record(config: RunConfig, series: TimeSeries) -> Dict[str, Any]:
    """Return the summary of a finished run."""
    decay: Optional[float]
    try:
        decay = fit_decay_rate(series.w, series.t, t_start=config.params.A)
        degenerate = False
    except DegenerateFit as err:
        _LOGGER.warning("No decay rate for %s: %s", config.name, err)
        decay, degenerate = None, True

    return {
        ATTR_FINAL_D: float(series.D[-1]),
        ATTR_FINAL_BOUNDARY: float(series.f_boundary[-1]),
        ATTR_FINAL_Y: float(series.y[-1]),
        ATTR_FINAL_W: float(series.w[-1]),
        ATTR_DECAY_RATE: decay,
        ATTR_DEGENERATE: degenerate,
        ATTR_MAX_LOG_RATIO: float(np.nanmax(series.w)),
        ATTR_D_STAR: config.eq.d_star,
        ATTR_Y_STAR: config.eq.y_star,
        ATTR_BETA: config.eq.beta,
        ATTR_STEPS: int(series.step[-1]),
    }


def _ergodic_section(config: RunConfig, t_end: float) -> Dict[str, Any]:
    """Run the IDE from the configured profile and report its settling."""
    params, eq = config.params, config.eq
    f0 = config.initial_profile()
    prob = kernel_from_model(params, eq, history=history_from_profile(f0, params))
    series = solve_ide(prob, t_end)
    P_value = discrete_projection(prob, eq.d_star)
    diagnostics = phi_and_decay(series, eq.d_star, P_value)

    section: Dict[str, Any] = {
        "P": ergodic_projection(f0, params, eq),
        "P_discrete": P_value,
        "eps_fit": diagnostics.eps_fit,
        "K_fit": diagnostics.K_fit,
        "degenerate_fit": diagnostics.degenerate,
        "phi_bound_holds": phi_inequality_holds(prob, series, eq.d_star, P_value),
    }

    normalized = rescale_kernel(prob, -eq.d_star)
    try:
        normalized_series = solve_ide(normalized, t_end)
        section["envelope_holds"] = split_mass_envelope_holds(
            normalized, normalized_series
        )
        section["envelope_b"] = normalized.b
    except ChemostatError as err:
        section["envelope_error"] = str(err)
    return section


def _closed_loop_section(config: RunConfig, eps: float) -> Dict[str, Any]:
    """Check the per-period contraction and the exponential envelope of w."""
    params, eq, spec = config.params, config.eq, config.controller
    f0 = config.initial_profile()
    closed = run_simulation(params, eq, spec, f0, config.t_end)
    reference_run = open_loop(params, eq, f0, config.t_end)
    try:
        report = contraction_monitor(closed, reference_run, spec, eq.d_star)
    except DegenerateMargin as err:
        return {"rates_error": str(err)}
    section: Dict[str, Any] = {
        "delta": report.delta,
        "contraction_holds": report.holds,
        "min_margin": float(np.min(report.margin)) if report.margin.size else math.inf,
    }

    try:
        rates = theoretical_rates(spec, eps, eq.d_star)
    except DegenerateMargin as err:
        section["rates_error"] = str(err)
        return section
    per_period = params.steps_per_period
    sampled = closed.step % per_period == 0
    w, t = closed.w[sampled], closed.t[sampled]
    kappa = envelope_constant(w, t, rates.sigma)
    section.update(
        {
            "sigma": rates.sigma,
            "delta_tilde": rates.delta_tilde,
            "kappa": kappa,
            "envelope_holds": envelope_holds(w, t, rates.sigma, kappa),
        }
    )
    return section


def ide_check_report(
    config: RunConfig, t_end: float = IDE_CHECK_T_END, cross_check: bool = True
) -> Dict[str, Any]:
    """Return the IDE, envelope and ergodicity diagnostics of a configuration."""
    _LOGGER.info("Running IDE checks for %s", config.name)
    report: Dict[str, Any] = {
        "name": config.name,
        ATTR_D_STAR: config.eq.d_star,
        ATTR_Y_STAR: config.eq.y_star,
    }
    report["ergodic"] = _ergodic_section(config, t_end)

    if config.controller.variant != OPEN_LOOP:
        eps = report["ergodic"]["eps_fit"]
        report["closed_loop"] = _closed_loop_section(config, eps)

    initial = config.document[CONF_INITIAL]
    if cross_check and CONF_B0 in initial:
        check = cross_validate(
            config.params,
            initial[CONF_B0],
            initial[CONF_C],
            initial[CONF_THETA],
            t_end=CROSS_CHECK_T_END,
            variant=config.controller.variant,
        )
        report["cross_validation"] = {
            "steps": list(check.steps),
            "boundary_gaps": list(check.boundary_gaps),
            "profile_gaps": list(check.profile_gaps),
            "order": check.order,
        }
    return report
