"""Test the Chemostat Control diagnostics."""
import logging
from unittest.mock import patch

import pytest

from chemostat_control.config_flow import config_from_document, preset_config
from chemostat_control.const import (
    ATTR_DECAY_RATE,
    ATTR_DEGENERATE,
    ATTR_FINAL_BOUNDARY,
    ATTR_FINAL_D,
    ATTR_FINAL_W,
    ATTR_STEPS,
)
from chemostat_control.diagnostics import ide_check_report, summary_record
from chemostat_control.exceptions import DegenerateMargin
from chemostat_control.pde_sim import run_simulation
from tests.const import FAKE_CONFIG_DATA_EQUILIBRIUM


def _run(config):
    return run_simulation(
        config.params,
        config.eq,
        config.controller,
        config.initial_profile(),
        config.t_end,
    )


def test_summary_record(fake_config):
    result = summary_record(fake_config, _run(fake_config))

    assert isinstance(result, dict)
    assert result[ATTR_STEPS] == 100
    assert result[ATTR_DEGENERATE] is False
    assert isinstance(result[ATTR_DECAY_RATE], float)
    assert 0.5 <= result[ATTR_FINAL_D] <= 1.5
    assert result[ATTR_FINAL_BOUNDARY] > 0
    assert result["max_abs_log_ratio"] >= result[ATTR_FINAL_W]
    assert result["d_star"] == pytest.approx(1.0, abs=1e-8)


def test_summary_record_at_equilibrium(out_dir, caplog):
    caplog.set_level(logging.WARNING)
    config = config_from_document(FAKE_CONFIG_DATA_EQUILIBRIUM)
    result = summary_record(config, _run(config))

    assert result[ATTR_DEGENERATE] is True
    assert result[ATTR_DECAY_RATE] is None
    assert result[ATTR_FINAL_D] == config.eq.d_star
    assert "No decay rate for fake_equilibrium" in caplog.text


def test_ide_check_report(out_dir):
    result = ide_check_report(preset_config("sim1"), cross_check=False)

    assert result["name"] == "sim1"
    ergodic = result["ergodic"]
    assert ergodic["degenerate_fit"] is False
    assert ergodic["eps_fit"] > 0
    assert ergodic["phi_bound_holds"] is True
    assert ergodic["envelope_holds"] is True
    assert ergodic["envelope_b"] == pytest.approx(1.0, abs=1e-9)
    assert ergodic["P"] == pytest.approx(ergodic["P_discrete"], rel=1e-2)

    closed_loop = result["closed_loop"]
    assert closed_loop["delta"] == pytest.approx(0.1)
    assert closed_loop["contraction_holds"] is True
    assert closed_loop["envelope_holds"] is True
    assert "cross_validation" not in result


def test_ide_check_report_at_equilibrium(out_dir):
    config = config_from_document(FAKE_CONFIG_DATA_EQUILIBRIUM)
    result = ide_check_report(config, t_end=10.0)

    assert result["ergodic"]["degenerate_fit"] is True
    assert result["ergodic"]["P"] == pytest.approx(1.0, rel=1e-12)
    assert "closed_loop" not in result
    assert "cross_validation" not in result


def test_ide_check_report_margin_on_clamp(fake_config):
    with patch(
        "chemostat_control.diagnostics.contraction_monitor",
        side_effect=DegenerateMargin("D*=1.5 is not inside (0.5, 1.5)"),
    ):
        result = ide_check_report(fake_config, t_end=4.0, cross_check=False)

    assert result["closed_loop"] == {
        "rates_error": "D*=1.5 is not inside (0.5, 1.5)"
    }
