"""Configuration loading and validation for Chemostat Control."""
from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import voluptuous as vol

from .const import (
    CONF_AUTO,
    CONF_B0,
    CONF_BIAS,
    CONF_C,
    CONF_CONTROLLER,
    CONF_D_MAX,
    CONF_D_MIN,
    CONF_D_STAR_USED,
    CONF_EQUILIBRIUM,
    CONF_G,
    CONF_GRID,
    CONF_HORIZON,
    CONF_INITIAL,
    CONF_K,
    CONF_MODEL,
    CONF_MU,
    CONF_NAME,
    CONF_OUT_DIR,
    CONF_OUTPUT,
    CONF_P,
    CONF_PERIOD,
    CONF_PROFILE_TABLE,
    CONF_SCALE,
    CONF_STEP,
    CONF_STRIDE,
    CONF_T_END,
    CONF_TARGET_D_STAR,
    CONF_THETA,
    CONF_VARIANT,
    DEFAULT_BIAS,
    DEFAULT_HORIZON,
    DEFAULT_MU,
    DEFAULT_OUT_DIR,
    DEFAULT_P,
    DEFAULT_PERIOD,
    DEFAULT_SCALE,
    DEFAULT_STEP,
    DEFAULT_STRIDE,
    DEFAULT_T_END,
    DEFAULT_TARGET_D_STAR,
    ENV_OUT_DIR,
    KIND_CONSTANT,
    KIND_TABLE,
    KIND_TRIANGULAR,
    OUTPUT_FEEDBACK,
    PRESETS,
    VARIANTS,
)
from .control import ControllerSpec, controller_for
from .exceptions import ConfigParseError, ConfigValidationError, GridAlignmentError
from .model import (
    AgeFunction,
    Equilibrium,
    ModelParams,
    grid_steps,
    make_initial_profile,
    profile_from_table,
    solve_d_star,
    triangular_birth_scale,
)
from .quadrature import AgeProfile

_LOGGER = logging.getLogger(__name__)

STRINGS_FILE = Path(__file__).with_name("strings.json")

_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
_NON_NEGATIVE = vol.All(vol.Coerce(float), vol.Range(min=0))
_TABLE = vol.All(
    [vol.ExactSequence([vol.Coerce(float), vol.Coerce(float)])], vol.Length(min=2)
)

FUNCTION_SCHEMA = vol.Any(
    vol.Schema({vol.Required(KIND_CONSTANT): _NON_NEGATIVE}),
    vol.Schema(
        {
            vol.Required(KIND_TRIANGULAR): {
                vol.Required(CONF_G, default=CONF_AUTO): vol.Any(CONF_AUTO, _POSITIVE)
            }
        }
    ),
    vol.Schema({vol.Required(KIND_TABLE): _TABLE}),
    msg="expected {constant: v}, {triangular: {g: v|auto}} or {table: [[a, v], ...]}",
)

MODEL_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_HORIZON, default=DEFAULT_HORIZON): _POSITIVE,
        vol.Required(CONF_MU, default={KIND_CONSTANT: DEFAULT_MU}): FUNCTION_SCHEMA,
        vol.Required(CONF_K): FUNCTION_SCHEMA,
        vol.Required(CONF_P, default={KIND_CONSTANT: DEFAULT_P}): FUNCTION_SCHEMA,
        vol.Required(CONF_D_MIN): _POSITIVE,
        vol.Required(CONF_D_MAX): _POSITIVE,
        vol.Required(CONF_PERIOD, default=DEFAULT_PERIOD): _POSITIVE,
        vol.Required(CONF_SCALE, default=DEFAULT_SCALE): _POSITIVE,
        vol.Required(CONF_TARGET_D_STAR, default=DEFAULT_TARGET_D_STAR): _POSITIVE,
    }
)

GRID_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_STEP, default=DEFAULT_STEP): _POSITIVE,
        vol.Required(CONF_T_END, default=DEFAULT_T_END): _POSITIVE,
    }
)

CONTROLLER_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_VARIANT, default=OUTPUT_FEEDBACK): vol.In(VARIANTS),
        vol.Required(CONF_D_STAR_USED, default=CONF_AUTO): vol.Any(
            CONF_AUTO, _POSITIVE
        ),
        vol.Required(CONF_BIAS, default=DEFAULT_BIAS): _POSITIVE,
    }
)

INITIAL_SCHEMA = vol.Any(
    vol.Schema(
        {
            vol.Required(CONF_B0): _POSITIVE,
            vol.Required(CONF_C): _POSITIVE,
            vol.Required(CONF_THETA): _POSITIVE,
        }
    ),
    vol.Schema({vol.Required(CONF_PROFILE_TABLE): _TABLE}),
    vol.Schema({vol.Required(CONF_EQUILIBRIUM): True}),
    msg="expected {b0, c, theta}, {table: [[a, v], ...]} or {equilibrium: true}",
)

OUTPUT_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_STRIDE, default=DEFAULT_STRIDE): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
        vol.Optional(CONF_OUT_DIR): str,
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NAME, default="run"): str,
        vol.Required(CONF_MODEL): MODEL_SCHEMA,
        vol.Required(CONF_GRID, default=dict): GRID_SCHEMA,
        vol.Required(CONF_CONTROLLER, default=dict): CONTROLLER_SCHEMA,
        vol.Required(CONF_INITIAL): INITIAL_SCHEMA,
        vol.Required(CONF_OUTPUT, default=dict): OUTPUT_SCHEMA,
    }
)


@dataclass(frozen=True)
class RunConfig:
    """A validated run with its model solved."""

    name: str
    document: Dict[str, Any]
    params: ModelParams
    eq: Equilibrium
    controller: ControllerSpec
    t_end: float
    stride: int
    out_dir: str

    def initial_profile(self) -> AgeProfile:
        """Return the configured initial profile on the model grid."""
        initial = self.document[CONF_INITIAL]
        if initial.get(CONF_EQUILIBRIUM):
            return self.eq.f_star
        if CONF_PROFILE_TABLE in initial:
            return profile_from_table(initial[CONF_PROFILE_TABLE], self.params)
        return make_initial_profile(
            initial[CONF_B0], initial[CONF_C], initial[CONF_THETA], self.params
        )


def error_message(key: str) -> str:
    """Return the message for a validation error key."""
    strings = json.loads(STRINGS_FILE.read_text(encoding="utf-8"))
    return strings["config"]["error"].get(key, key)


def _on_grid(span: float, h: float) -> bool:
    try:
        grid_steps(span, h)
    except GridAlignmentError:
        return False
    return True


def _validate_user_input(document: dict) -> dict:
    """Validate cross-field rules of a schema-checked document.

    Returns dict of field path to error key
    """
    errors = {}
    model = document[CONF_MODEL]
    h = document[CONF_GRID][CONF_STEP]

    if not model[CONF_D_MIN] < model[CONF_D_MAX]:
        errors[f"{CONF_MODEL}.{CONF_D_MIN}"] = "bounds_inverted"

    if not _on_grid(model[CONF_HORIZON], h):
        errors[f"{CONF_MODEL}.{CONF_HORIZON}"] = "horizon_not_on_grid"

    if not _on_grid(model[CONF_PERIOD], h):
        errors[f"{CONF_MODEL}.{CONF_PERIOD}"] = "period_not_on_grid"

    if not _on_grid(document[CONF_GRID][CONF_T_END], h):
        errors[f"{CONF_GRID}.{CONF_T_END}"] = "t_end_not_on_grid"

    for name in (CONF_MU, CONF_K, CONF_P):
        spec = model[name]
        if KIND_TABLE in spec:
            if not all(_on_grid(age, h) or age == 0 for age, _ in spec[KIND_TABLE]):
                errors[f"{CONF_MODEL}.{name}"] = "breakpoint_off_grid"
        elif KIND_TRIANGULAR in spec:
            if not _on_grid(0.5 * model[CONF_HORIZON], h):
                errors[f"{CONF_MODEL}.{name}"] = "breakpoint_off_grid"
            elif spec[KIND_TRIANGULAR][CONF_G] == CONF_AUTO and (
                KIND_CONSTANT not in model[CONF_MU]
            ):
                errors[f"{CONF_MODEL}.{name}"] = "auto_needs_constant_mu"

    return errors


def _build_function(spec: dict, model: dict) -> AgeFunction:
    """Turn a function spec into an AgeFunction."""
    if KIND_CONSTANT in spec:
        return AgeFunction.constant(spec[KIND_CONSTANT])
    if KIND_TABLE in spec:
        return AgeFunction.table(spec[KIND_TABLE])
    g = spec[KIND_TRIANGULAR][CONF_G]
    if g == CONF_AUTO:
        g = triangular_birth_scale(
            model[CONF_MU][KIND_CONSTANT],
            model[CONF_TARGET_D_STAR],
            model[CONF_HORIZON],
        )
        _LOGGER.debug("Triangular birth scale resolved to %s", g)
    return AgeFunction.triangular(g, model[CONF_HORIZON])


def default_out_dir() -> str:
    """Return the output root from the environment or the default."""
    return os.environ.get(ENV_OUT_DIR, DEFAULT_OUT_DIR)


def _validate(document: dict) -> dict:
    """Run the schema and the cross-field checks, raising on the first error."""
    try:
        document = CONFIG_SCHEMA(copy.deepcopy(document))
    except vol.Invalid as err:
        path = ".".join(str(part) for part in err.path)
        _LOGGER.error("Invalid configuration at %s: %s", path or "<root>", err.msg)
        raise ConfigValidationError(err.msg, path) from err

    errors = _validate_user_input(document)
    if errors:
        path, key = next(iter(errors.items()))
        _LOGGER.error("Invalid configuration at %s: %s", path, key)
        raise ConfigValidationError(error_message(key), path)
    return document


def config_from_document(document: dict) -> RunConfig:
    """Validate a configuration document and solve its model."""
    document = _validate(document)
    model = document[CONF_MODEL]
    grid = document[CONF_GRID]
    controller = document[CONF_CONTROLLER]

    params = ModelParams(
        A=model[CONF_HORIZON],
        mu=_build_function(model[CONF_MU], model),
        k=_build_function(model[CONF_K], model),
        p=_build_function(model[CONF_P], model),
        D_min=model[CONF_D_MIN],
        D_max=model[CONF_D_MAX],
        T=model[CONF_PERIOD],
        M=model[CONF_SCALE],
        h=grid[CONF_STEP],
    )
    eq = solve_d_star(params)
    d_star_used: Optional[float] = None
    if controller[CONF_D_STAR_USED] != CONF_AUTO:
        d_star_used = controller[CONF_D_STAR_USED]
    spec = controller_for(
        controller[CONF_VARIANT], params, eq, d_star_used, controller[CONF_BIAS]
    )

    return RunConfig(
        name=document[CONF_NAME],
        document=document,
        params=params,
        eq=eq,
        controller=spec,
        t_end=grid[CONF_T_END],
        stride=document[CONF_OUTPUT][CONF_STRIDE],
        out_dir=document[CONF_OUTPUT].get(CONF_OUT_DIR, default_out_dir()),
    )


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        _LOGGER.error("Cannot read configuration %s: %s", path, err)
        raise ConfigParseError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        _LOGGER.error("Configuration %s is not valid JSON: %s", path, err)
        raise ConfigParseError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(document, dict):
        raise ConfigParseError(f"{path} must hold a JSON object")
    return config_from_document(document)


def preset_config(name: str) -> RunConfig:
    """Return the configuration of a named preset."""
    if name not in PRESETS:
        raise ConfigValidationError(
            f"unknown preset, expected one of {', '.join(PRESETS)}", CONF_NAME
        )
    return config_from_document(PRESETS[name])


def dump_config(config: RunConfig) -> dict:
    """Return the validated document of a configuration."""
    return copy.deepcopy(config.document)


def save_config(config: RunConfig, path: str) -> None:
    """Write the configuration document as JSON."""
    Path(path).write_text(
        json.dumps(dump_config(config), indent=2, sort_keys=True), encoding="utf-8"
    )


def config_with(config: RunConfig, axis: str, value: float) -> RunConfig:
    """Return the configuration with one sweep axis set."""
    document = dump_config(config)
    if axis == CONF_PERIOD:
        document[CONF_MODEL][CONF_PERIOD] = value
    elif axis == CONF_BIAS:
        document[CONF_CONTROLLER][CONF_BIAS] = value
    elif axis in (CONF_B0, CONF_C, CONF_THETA):
        if CONF_B0 not in document[CONF_INITIAL]:
            raise ConfigValidationError(
                "sweeping the initial family needs b0, c and theta", CONF_INITIAL
            )
        document[CONF_INITIAL][axis] = value
    else:
        raise ConfigValidationError(f"cannot sweep over {axis}", axis)
    return config_from_document(document)
