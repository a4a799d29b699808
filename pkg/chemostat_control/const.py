"""Constants for Chemostat Control."""
from __future__ import annotations

from typing import Final

DOMAIN = "chemostat_control"
VERSION = "0.1.0"
ENV_OUT_DIR = "CHEMOSTAT_OUT_DIR"

# Controller variants
OPEN_LOOP = "open_loop"
NEWBORN_FEEDBACK = "newborn_feedback"
OUTPUT_FEEDBACK = "output_feedback"
VARIANTS = [OPEN_LOOP, NEWBORN_FEEDBACK, OUTPUT_FEEDBACK]

# Age function kinds
KIND_CONSTANT = "constant"
KIND_TRIANGULAR = "triangular"
KIND_TABLE = "table"

# Quadrature weights
WEIGHT_PLAIN = "plain"
WEIGHT_BIRTH = "birth_modulus"
WEIGHT_OUTPUT = "output"

# Configuration blocks
CONF_MODEL = "model"
CONF_GRID = "grid"
CONF_CONTROLLER = "controller"
CONF_INITIAL = "initial"
CONF_OUTPUT = "output"

# Configuration properties
CONF_HORIZON = "A"
CONF_MU = "mu"
CONF_K = "k"
CONF_P = "p"
CONF_D_MIN = "D_min"
CONF_D_MAX = "D_max"
CONF_PERIOD = "T"
CONF_SCALE = "M"
CONF_TARGET_D_STAR = "target_d_star"
CONF_STEP = "h"
CONF_T_END = "t_end"
CONF_VARIANT = "variant"
CONF_D_STAR_USED = "d_star_used"
CONF_BIAS = "bias"
CONF_B0 = "b0"
CONF_C = "c"
CONF_THETA = "theta"
CONF_PROFILE_TABLE = "table"
CONF_OUT_DIR = "out_dir"
CONF_STRIDE = "stride"
CONF_NAME = "name"
CONF_G = "g"
CONF_AUTO = "auto"
CONF_EQUILIBRIUM = "equilibrium"

# Defaults
DEFAULT_HORIZON = 2.0
DEFAULT_MU = 0.1
DEFAULT_P = 1.0
DEFAULT_D_MIN = 0.5
DEFAULT_D_MAX = 1.5
DEFAULT_PERIOD = 0.4
DEFAULT_SCALE = 1.0
DEFAULT_TARGET_D_STAR = 1.0
DEFAULT_STEP = 0.04
DEFAULT_T_END = 40.0
DEFAULT_BIAS = 1.0
DEFAULT_STRIDE = 1
DEFAULT_OUT_DIR = "out"
DEFAULT_JOBS = 1
DEFAULT_RUN_TIMEOUT = 300
DEFAULT_TOL_REL = 1e-9
DEFAULT_TOL_ABS = 1e-12
DEFAULT_SPLIT_FRACTION = 0.5

# Numerical tolerances
ROOT_TOL: Final = 1e-10
ROOT_MAX_ITER: Final = 200
COMPAT_TOL: Final = 1e-9
BRANCH_TOL: Final = 1e-12
SERIES_TOL: Final = 1e-3
ALIGN_TOL: Final = 1e-9
PHI_FLOOR: Final = 1e-12
MIN_FIT_SAMPLES: Final = 10
ENVELOPE_SLACK: Final = 1e-8
CONTRACTION_SLACK: Final = 1e-6
ERGODIC_REFINE: Final = 4
LOTKA_REFINE: Final = 4
BISECT_XTOL: Final = 1e-14
POSITIVITY_REFINE: Final = 10

# Output
CSV_COLUMNS = [
    "step",
    "t",
    "D",
    "f_boundary",
    "y",
    "w",
    "ratio_min",
    "ratio_max",
]
CSV_FLOAT_FORMAT = "%.17g"
TIMESERIES_FILE = "timeseries.csv"
SUMMARY_FILE = "summary.json"
SWEEP_FILE = "sweep.csv"
SWEEP_AXES = [CONF_PERIOD, CONF_BIAS, CONF_B0, CONF_C, CONF_THETA]

# Summary attributes
ATTR_FINAL_D = "final_D"
ATTR_FINAL_BOUNDARY = "final_f_boundary"
ATTR_FINAL_Y = "final_y"
ATTR_FINAL_W = "final_w"
ATTR_DECAY_RATE = "decay_rate"
ATTR_MAX_LOG_RATIO = "max_abs_log_ratio"
ATTR_DEGENERATE = "degenerate_fit"
ATTR_D_STAR = "d_star"
ATTR_Y_STAR = "y_star"
ATTR_BETA = "beta"
ATTR_STEPS = "steps"
ATTR_ERROR = "error"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_MISMATCH = 3

# Scenario presets
PRESET_SIM1 = "sim1"
PRESET_SIM2 = "sim2"
PRESET_SIM3_NEWBORN = "sim3_newborn"
PRESET_SIM3_OUTPUT = "sim3_output"
PRESET_OPENLOOP = "openloop"
PRESET_EQUILIBRIUM = "equilibrium"

BASELINE_MODEL = {
    CONF_HORIZON: DEFAULT_HORIZON,
    CONF_MU: {KIND_CONSTANT: DEFAULT_MU},
    CONF_K: {KIND_TRIANGULAR: {CONF_G: CONF_AUTO}},
    CONF_P: {KIND_CONSTANT: DEFAULT_P},
    CONF_D_MIN: DEFAULT_D_MIN,
    CONF_D_MAX: DEFAULT_D_MAX,
    CONF_PERIOD: DEFAULT_PERIOD,
    CONF_SCALE: DEFAULT_SCALE,
    CONF_TARGET_D_STAR: DEFAULT_TARGET_D_STAR,
}
BASELINE_GRID = {CONF_STEP: DEFAULT_STEP, CONF_T_END: DEFAULT_T_END}
SCENARIO_1_INITIAL = {CONF_B0: 0.2, CONF_C: 0.8, CONF_THETA: 1.0}
SCENARIO_2_INITIAL = {CONF_B0: 1.0, CONF_C: 4.0, CONF_THETA: 1.0}
SCENARIO_3_BIAS = 0.7


def _preset(name: str, variant: str, initial: dict, bias: float = DEFAULT_BIAS) -> dict:
    """Build a frozen preset document."""
    return {
        CONF_NAME: name,
        CONF_MODEL: dict(BASELINE_MODEL),
        CONF_GRID: dict(BASELINE_GRID),
        CONF_CONTROLLER: {
            CONF_VARIANT: variant,
            CONF_D_STAR_USED: CONF_AUTO,
            CONF_BIAS: bias,
        },
        CONF_INITIAL: dict(initial),
        CONF_OUTPUT: {CONF_STRIDE: DEFAULT_STRIDE},
    }


PRESETS = {
    PRESET_SIM1: _preset(PRESET_SIM1, OUTPUT_FEEDBACK, SCENARIO_1_INITIAL),
    PRESET_SIM2: _preset(PRESET_SIM2, OUTPUT_FEEDBACK, SCENARIO_2_INITIAL),
    PRESET_SIM3_NEWBORN: _preset(
        PRESET_SIM3_NEWBORN, NEWBORN_FEEDBACK, SCENARIO_1_INITIAL, SCENARIO_3_BIAS
    ),
    PRESET_SIM3_OUTPUT: _preset(
        PRESET_SIM3_OUTPUT, OUTPUT_FEEDBACK, SCENARIO_1_INITIAL, SCENARIO_3_BIAS
    ),
    PRESET_OPENLOOP: _preset(PRESET_OPENLOOP, OPEN_LOOP, SCENARIO_1_INITIAL),
    PRESET_EQUILIBRIUM: _preset(
        PRESET_EQUILIBRIUM, OPEN_LOOP, {CONF_EQUILIBRIUM: True}
    ),
}
