"""Tests for stability functionals and rate constants."""
import math

import numpy as np
import pytest

from chemostat_control.const import OUTPUT_FEEDBACK
from chemostat_control.control import ControllerSpec
from chemostat_control.exceptions import (
    DegenerateFit,
    DegenerateMargin,
    NonPositiveProfile,
)
from chemostat_control.metrics import (
    envelope_constant,
    envelope_holds,
    fit_decay_rate,
    log_deviation,
    ratio_envelope,
    theoretical_rates,
)
from chemostat_control.quadrature import AgeProfile

BASELINE_SPEC = ControllerSpec(
    variant=OUTPUT_FEEDBACK,
    d_star_used=1.0,
    reference=0.808361,
    T=0.4,
    D_min=0.5,
    D_max=1.5,
)


def test_ratio_envelope_and_log_deviation():
    f_star = AgeProfile(np.full(11, 2.0), 0.1)
    profile = AgeProfile(np.linspace(1.0, 4.0, 11), 0.1)
    assert ratio_envelope(profile, f_star) == (0.5, 2.0)
    assert log_deviation(profile, f_star) == pytest.approx(math.log(2.0))
    assert log_deviation(f_star, f_star) == 0.0


def test_ratio_envelope_rejects_non_positive():
    values = np.ones(11)
    values[4] = 0.0
    with pytest.raises(NonPositiveProfile):
        ratio_envelope(AgeProfile(values, 0.1), AgeProfile(np.ones(11), 0.1))


def test_theoretical_rates_baseline_clamps():
    rates = theoretical_rates(BASELINE_SPEC, eps=1.0)
    assert rates.delta == pytest.approx(0.1)
    assert rates.delta_tilde == pytest.approx(0.1)
    assert rates.sigma == pytest.approx(0.1 / 1.6)

    slow = theoretical_rates(BASELINE_SPEC, eps=0.1)
    assert slow.delta_tilde == pytest.approx(0.04)

    unbounded = theoretical_rates(BASELINE_SPEC, eps=math.inf)
    assert unbounded.delta_tilde == pytest.approx(0.1)


def test_theoretical_rates_use_true_d_star():
    rates = theoretical_rates(BASELINE_SPEC, eps=1.0, d_star=1.3)
    assert rates.delta == pytest.approx(0.5 * 0.2 * 0.4)


def test_degenerate_margin():
    with pytest.raises(DegenerateMargin):
        theoretical_rates(BASELINE_SPEC, eps=1.0, d_star=1.5)
    with pytest.raises(DegenerateMargin):
        theoretical_rates(BASELINE_SPEC, eps=0.0)


def test_fit_decay_rate():
    t = np.linspace(0.0, 10.0, 101)
    w = 3.0 * np.exp(-0.5 * t)
    assert fit_decay_rate(w, t) == pytest.approx(0.5, rel=1e-10)
    assert fit_decay_rate(w, t, t_start=5.0) == pytest.approx(0.5, rel=1e-10)


def test_fit_decay_rate_degenerate():
    t = np.linspace(0.0, 10.0, 101)
    with pytest.raises(DegenerateFit):
        fit_decay_rate(np.zeros_like(t), t)
    with pytest.raises(DegenerateFit):
        fit_decay_rate(np.exp(-t), t, t_start=9.5)


def test_envelope_constant():
    t = np.linspace(0.0, 8.0, 81)
    w = 0.4 * np.exp(-0.3 * t) * (1.0 + 0.1 * np.cos(3.0 * t))
    kappa = envelope_constant(w, t, 0.2)
    assert math.isfinite(kappa)
    assert envelope_holds(w, t, 0.2, kappa)
    assert not envelope_holds(w, t, 0.2, 0.5 * kappa)
