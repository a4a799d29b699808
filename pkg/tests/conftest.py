"""Fixtures for Chemostat Control tests."""
import copy

import pytest

from chemostat_control.config_flow import config_from_document
from chemostat_control.model import (
    AgeFunction,
    ModelParams,
    make_initial_profile,
    solve_d_star,
    triangular_birth_scale,
)
from tests.const import FAKE_CONFIG_DATA


@pytest.fixture(scope="session")
def baseline_params():
    """Model of the simulation studies on the h=0.04 grid."""
    return ModelParams(
        A=2.0,
        mu=AgeFunction.constant(0.1),
        k=AgeFunction.triangular(triangular_birth_scale(0.1, 1.0), 2.0),
        p=AgeFunction.constant(1.0),
        D_min=0.5,
        D_max=1.5,
        T=0.4,
        M=1.0,
        h=0.04,
    )


@pytest.fixture(scope="session")
def baseline_eq(baseline_params):
    """Equilibrium of the baseline model."""
    return solve_d_star(baseline_params)


@pytest.fixture(scope="session")
def scenario_1_profile(baseline_params):
    """Initial profile with b0=0.2, c=0.8, theta=1."""
    return make_initial_profile(0.2, 0.8, 1.0, baseline_params)


@pytest.fixture(scope="session")
def scenario_2_profile(baseline_params):
    """Initial profile with b0=1, c=4, theta=1."""
    return make_initial_profile(1.0, 4.0, 1.0, baseline_params)


@pytest.fixture()
def out_dir(tmp_path, monkeypatch):
    """Point the default output root at a temporary directory."""
    monkeypatch.setenv("CHEMOSTAT_OUT_DIR", str(tmp_path))
    yield tmp_path


@pytest.fixture()
def fake_config(out_dir):
    """Short validated run of scenario 1."""
    return config_from_document(copy.deepcopy(FAKE_CONFIG_DATA))
