"""Tests for the characteristic-grid simulator."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from chemostat_control.const import NEWBORN_FEEDBACK, OUTPUT_FEEDBACK
from chemostat_control.control import controller_for
from chemostat_control.exceptions import GridAlignmentError, NonPositiveProfile
from chemostat_control.metrics import ratio_envelope
from chemostat_control.model import initial_family, make_initial_profile
from chemostat_control.pde_sim import (
    AgeProfile,
    SimState,
    measured_output,
    open_loop,
    renewal_boundary,
    run_simulation,
    run_uncontrolled,
    transport_step,
)
from tests.const import BASELINE_BIASED_BOUNDARY, RENEWAL_ORACLE_TOL


def test_transport_step(baseline_params, scenario_1_profile):
    state = SimState(step_index=3, profile=scenario_1_profile, current_D=1.2)
    moved = transport_step(state, baseline_params)
    assert np.isnan(moved.values[0])
    assert moved.values[1:] == pytest.approx(
        scenario_1_profile.values[:-1] * np.exp(-1.3 * 0.04), rel=1e-15
    )
    assert state.time() == pytest.approx(0.12)


def test_renewal_against_fine_grid_oracle(baseline_params, scenario_1_profile):
    family = initial_family(0.2, 0.8, 1.0, baseline_params)
    ages = np.linspace(0.0, baseline_params.A, 100 * baseline_params.N + 1)
    oracle = trapezoid(baseline_params.k(ages) * family(ages), ages)
    boundary = renewal_boundary(scenario_1_profile, baseline_params)
    assert boundary == pytest.approx(oracle, rel=RENEWAL_ORACLE_TOL)


def test_renewal_is_linear(baseline_params, scenario_1_profile):
    scaled = AgeProfile(3.0 * scenario_1_profile.values, baseline_params.h)
    assert renewal_boundary(scaled, baseline_params) == pytest.approx(
        3.0 * renewal_boundary(scenario_1_profile, baseline_params), rel=1e-14
    )


def test_output_of_exponential_cells(baseline_params):
    h = baseline_params.h
    rng = np.random.default_rng(21)
    for _ in range(20):
        rates = rng.uniform(-3.0, 3.0, baseline_params.N)
        rates[0] = rates[1]
        values = 0.7 * np.exp(np.concatenate(([0.0], np.cumsum(rates * h))))
        oracle = np.sum(values[:-1] * np.expm1(rates * h) / rates)
        output = measured_output(AgeProfile(values, h), baseline_params)
        assert output == pytest.approx(oracle, rel=1e-8)


def test_output_of_equilibrium(baseline_params, baseline_eq):
    assert measured_output(baseline_eq.f_star, baseline_params) == pytest.approx(
        baseline_eq.y_star, rel=1e-14
    )


def test_equilibrium_is_a_fixed_point(baseline_params, baseline_eq):
    series = open_loop(baseline_params, baseline_eq, baseline_eq.f_star, 20.0, True)
    assert len(series) == 501
    f_star = baseline_eq.f_star.values
    gaps = np.abs(series.profiles - f_star[None, :]) / f_star[None, :]
    assert np.max(gaps) <= 1e-10
    assert np.all(series.D == baseline_eq.d_star)


def test_open_loop_neutral_stability(baseline_params, baseline_eq):
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 20:
        b0 = rng.uniform(0.2, 2.0)
        c = rng.uniform(0.2, 4.0)
        theta = rng.uniform(0.5, 2.5)
        try:
            f0 = make_initial_profile(b0, c, theta, baseline_params)
        except NonPositiveProfile:
            continue
        low, high = ratio_envelope(f0, baseline_eq.f_star)
        series = open_loop(baseline_params, baseline_eq, f0, 8.0)
        assert np.all(series.ratio_min >= low - 1e-8)
        assert np.all(series.ratio_max <= high + 1e-8)
        checked += 1


def test_open_loop_superposition(
    baseline_params, baseline_eq, scenario_1_profile, scenario_2_profile
):
    combined = AgeProfile(
        scenario_1_profile.values + scenario_2_profile.values, baseline_params.h
    )
    first, second, both = [
        open_loop(baseline_params, baseline_eq, f0, 8.0, True)
        for f0 in (scenario_1_profile, scenario_2_profile, combined)
    ]
    assert both.profiles == pytest.approx(first.profiles + second.profiles, rel=1e-10)
    assert both.y == pytest.approx(first.y + second.y, rel=1e-10)


def test_dilution_commutes_with_renewal(
    baseline_params, baseline_eq, scenario_1_profile
):
    diluted = open_loop(baseline_params, baseline_eq, scenario_1_profile, 4.0, True)
    undiluted = run_uncontrolled(
        baseline_params, scenario_1_profile, 4.0, keep_profiles=True
    )
    factor = np.exp(-baseline_eq.d_star * undiluted.t)
    assert diluted.profiles == pytest.approx(
        undiluted.profiles * factor[:, None], rel=1e-10
    )
    assert np.all(np.isnan(undiluted.w))


@pytest.mark.parametrize("variant", [NEWBORN_FEEDBACK, OUTPUT_FEEDBACK])
@pytest.mark.parametrize("initial", ["scenario_1_profile", "scenario_2_profile"])
def test_closed_loop_converges(variant, initial, baseline_params, baseline_eq, request):
    f0 = request.getfixturevalue(initial)
    spec = controller_for(variant, baseline_params, baseline_eq)
    series = run_simulation(baseline_params, baseline_eq, spec, f0, 40.0)
    assert series.w[-1] <= 1e-3
    assert np.all(series.D >= spec.D_min)
    assert np.all(series.D <= spec.D_max)

    per_period = baseline_params.steps_per_period
    held = series.D[(series.step // per_period) * per_period]
    assert np.array_equal(series.D, held)


def test_variants_agree(baseline_params, baseline_eq, scenario_2_profile):
    runs = [
        run_simulation(
            baseline_params,
            baseline_eq,
            controller_for(variant, baseline_params, baseline_eq),
            scenario_2_profile,
            40.0,
        )
        for variant in (NEWBORN_FEEDBACK, OUTPUT_FEEDBACK)
    ]
    newborn, output = (run.f_boundary for run in runs)
    assert np.max(np.abs(newborn - output) / output) <= 0.02


@pytest.mark.parametrize("variant", [NEWBORN_FEEDBACK, OUTPUT_FEEDBACK])
def test_biased_controller_offset(
    variant, baseline_params, baseline_eq, scenario_1_profile
):
    spec = controller_for(variant, baseline_params, baseline_eq, bias=0.7)
    series = run_simulation(
        baseline_params, baseline_eq, spec, scenario_1_profile, 40.0
    )
    assert series.f_boundary[-1] == pytest.approx(BASELINE_BIASED_BOUNDARY, rel=1e-2)
    assert series.D[-1] == pytest.approx(1.0, rel=1e-2)


def test_stride_keeps_last_step(baseline_params, baseline_eq, scenario_1_profile):
    spec = controller_for(OUTPUT_FEEDBACK, baseline_params, baseline_eq)
    series = run_simulation(
        baseline_params, baseline_eq, spec, scenario_1_profile, 4.0, stride=7
    )
    assert series.step[0] == 0
    assert series.step[-1] == 100
    assert np.all(np.diff(series.step)[:-1] == 7)
    assert len(next(series.rows())) == 8


def test_non_positive_profile_aborts(baseline_params):
    values = np.ones(baseline_params.N + 1)
    values[10] = -1.0
    with pytest.raises(NonPositiveProfile) as err:
        run_uncontrolled(baseline_params, AgeProfile(values, baseline_params.h), 1.0)
    assert err.value.step == 0
    assert err.value.node == 10


def test_t_end_off_grid(baseline_params, scenario_1_profile):
    with pytest.raises(GridAlignmentError):
        run_uncontrolled(baseline_params, scenario_1_profile, 1.01)


def test_profile_at_needs_profiles(baseline_params, baseline_eq, scenario_1_profile):
    series = open_loop(baseline_params, baseline_eq, scenario_1_profile, 0.4)
    with pytest.raises(ValueError):
        series.profile_at(0)
