"""Tests for the chemostat model."""
import logging

import numpy as np
import pytest
from scipy.integrate import quad

from chemostat_control.exceptions import (
    ConfigValidationError,
    GridAlignmentError,
    NonPositiveProfile,
    NoRootInBracket,
)
from chemostat_control.model import (
    AgeFunction,
    ModelParams,
    equilibrium_profile,
    grid_steps,
    initial_family,
    lotka_sharpe_moments,
    lotka_sharpe_residual,
    make_initial_profile,
    profile_from_table,
    solve_d_star,
    triangular_birth_scale,
)
from tests.const import (
    BASELINE_B1_SCENARIO_1,
    BASELINE_B1_SCENARIO_2,
    BASELINE_G,
    BASELINE_Y_STAR,
)


def _params(**changes):
    values = dict(
        A=2.0,
        mu=AgeFunction.constant(0.1),
        k=AgeFunction.triangular(triangular_birth_scale(0.1, 1.0), 2.0),
        p=AgeFunction.constant(1.0),
        D_min=0.5,
        D_max=1.5,
        T=0.4,
    )
    values.update(changes)
    return ModelParams(**values)


def test_baseline_constants(baseline_params, baseline_eq):
    assert triangular_birth_scale(0.1, 1.0) == pytest.approx(BASELINE_G, abs=1e-5)
    assert baseline_eq.y_star == pytest.approx(BASELINE_Y_STAR, abs=1e-5)
    assert initial_family(0.2, 0.8, 1.0, baseline_params).b1 == pytest.approx(
        BASELINE_B1_SCENARIO_1, abs=1e-7
    )
    assert initial_family(1.0, 4.0, 1.0, baseline_params).b1 == pytest.approx(
        BASELINE_B1_SCENARIO_2, abs=1e-6
    )


def test_lotka_sharpe_root(baseline_params, baseline_eq):
    assert baseline_eq.d_star == pytest.approx(1.0, abs=1e-8)
    assert abs(lotka_sharpe_residual(baseline_eq.d_star, baseline_params)) <= 1e-10
    assert baseline_eq.f_star.values[0] == pytest.approx(1.0, rel=1e-14)
    assert baseline_eq.beta == pytest.approx(baseline_eq.y_star, rel=1e-14)


def test_residual_is_increasing(baseline_params):
    rng = np.random.default_rng(5)
    for low, high in np.sort(rng.uniform(0.0, 3.0, (100, 2)), axis=1):
        assert lotka_sharpe_residual(low, baseline_params) < lotka_sharpe_residual(
            high, baseline_params
        )


def test_triangular_horizon_must_reach_a():
    with pytest.raises(ConfigValidationError) as err:
        _params(A=4.0, k=AgeFunction.triangular(2.0))
    assert err.value.path == "k"


def test_residual_on_longer_horizon():
    params = _params(A=4.0, k=AgeFunction.triangular(2.0, 4.0))
    expected, _ = quad(
        lambda a: 2.0 * min(a, 4.0 - a) * np.exp(-1.1 * a), 0.0, 4.0, points=[2.0]
    )
    assert lotka_sharpe_residual(1.0, params) == pytest.approx(
        1.0 - expected, abs=1e-10
    )


def test_equilibrium_scales_with_m():
    eq = solve_d_star(_params(M=3.0))
    assert eq.d_star == pytest.approx(1.0, abs=1e-8)
    assert eq.f_star.values[0] == pytest.approx(3.0, rel=1e-14)
    assert eq.y_star == pytest.approx(3.0 * BASELINE_Y_STAR, abs=3e-5)


def test_no_root_in_bracket():
    with pytest.raises(NoRootInBracket):
        solve_d_star(_params(D_max=0.9))


def test_triangular_birth_scale_without_decay():
    assert triangular_birth_scale(0.0, 0.0, 2.0) == 1.0


def test_general_table_kernel():
    k = AgeFunction.table([[0.0, 0.0], [0.4, 3.0], [1.2, 1.0], [2.0, 0.0]])
    params = _params(k=k, mu=AgeFunction.table([[0.0, 0.05], [2.0, 0.25]]))
    eq = solve_d_star(params)

    def survival(a):
        return np.exp(-(0.05 * a + 0.05 * a * a))

    def residual(rate):
        value, _ = quad(
            lambda a: k(a) * np.exp(-rate * a) * survival(a),
            0.0,
            2.0,
            points=[0.4, 1.2],
            epsrel=1e-12,
        )
        return 1.0 - value

    assert abs(residual(eq.d_star)) <= 1e-4


def test_moments_exact_for_tent(baseline_params):
    mass, first = lotka_sharpe_moments(baseline_params)
    assert mass == pytest.approx(BASELINE_G, abs=1e-5)
    assert first == pytest.approx(mass, rel=1e-12)


def test_initial_family_numeric_moments_match_closed_form(baseline_params):
    g = baseline_params.k.scale
    tent = AgeFunction.table([[0.0, 0.0], [1.0, g], [2.0, 0.0]])
    table_params = _params(k=tent)
    closed = initial_family(0.2, 0.8, 1.0, baseline_params)
    numeric = initial_family(0.2, 0.8, 1.0, table_params)
    assert numeric.b1 == pytest.approx(closed.b1, rel=1e-9)


def test_initial_profile_compatible(baseline_params, scenario_1_profile):
    assert scenario_1_profile.values[0] == pytest.approx(1.0, rel=1e-12)
    assert np.all(scenario_1_profile.values > 0)


def test_initial_profile_not_positive(baseline_params):
    with pytest.raises(NonPositiveProfile):
        make_initial_profile(1.0, 0.1, 1.0, baseline_params)
    with pytest.raises(ConfigValidationError):
        make_initial_profile(0.0, 0.8, 1.0, baseline_params)


def test_profile_from_table_regenerates_boundary(baseline_params, caplog):
    caplog.set_level(logging.WARNING)
    profile = profile_from_table([[0.0, 3.0], [2.0, 0.5]], baseline_params)
    assert "replacing it with the renewal value" in caplog.text
    ages = baseline_params.ages
    assert profile.values[1:] == pytest.approx(np.interp(ages, [0, 2], [3, 0.5])[1:])
    assert profile.values[0] != 3.0


def test_grid_alignment():
    assert grid_steps(0.4, 0.04) == 10
    with pytest.raises(GridAlignmentError):
        grid_steps(0.41, 0.04)
    with pytest.raises(GridAlignmentError):
        _params(T=0.41)
    with pytest.raises(GridAlignmentError):
        AgeFunction.table([[0.0, 1.0], [0.05, 2.0], [2.0, 2.0]]).sample(
            np.arange(51) * 0.04, 0.04
        )


def test_params_validation():
    with pytest.raises(ConfigValidationError) as err:
        _params(D_min=1.5, D_max=0.5)
    assert err.value.path == "D_min"
    with pytest.raises(ConfigValidationError):
        _params(p=AgeFunction.constant(0.0))


def test_with_step(baseline_params):
    finer = baseline_params.with_step(0.02)
    assert finer.N == 100
    assert finer.steps_per_period == 20
    profile = equilibrium_profile(1.0, finer)
    assert profile.values[-1] == pytest.approx(np.exp(-2.2), rel=1e-12)


def test_age_function_spec_round_trip():
    for func in (
        AgeFunction.constant(0.3),
        AgeFunction.table([[0.0, 1.0], [2.0, 0.0]]),
    ):
        kind, value = next(iter(func.to_spec().items()))
        if kind == "constant":
            assert AgeFunction.constant(value) == func
        else:
            assert AgeFunction.table(value) == func
