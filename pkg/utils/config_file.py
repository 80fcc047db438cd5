import configparser
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from utils.exceptions import InvalidInputError

logger = logging.getLogger(__name__)


def _float_list(text: str):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _int_list(text: str):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{text}'")


PARSERS = {str: str, int: int, float: float, bool: _bool, "floats": _float_list, "ints": _int_list}

# section -> key -> value type
SCHEMA: Dict[str, Dict[str, Any]] = {
    "run": {"output_dir": str, "threads": int, "cache_dir": str, "log_level": str, "input_dir": str},
    "domain": {
        "omega": str, "cells": "ints", "margin": float, "set": str, "exterior": str, "field": str,
        "outer_radius": float, "range": str, "boundary_set": str,
    },
    "energy": {
        "tag": str, "eps": float, "s": float, "sigma": float, "k": float, "c": float, "schedule": str,
        "part": str, "lam": float, "well_zeros": "floats", "well_scale": float, "kind": str,
        "xi_max": float, "count": int, "rescaled": bool,
    },
    "minimize": {
        "step_size": float, "min_step": float, "growth": float, "shrink": float, "armijo": float,
        "max_iter": int, "tol": float, "rel_energy_tol": float, "perturb": bool, "perturb_amplitude": float,
        "seed": str, "seed_value": float,
    },
    "experiment": {
        "name": str, "grid": "floats", "tolerance": float, "target_note": str,
        # experiment parameters
        "dim": int, "s": float, "eps": float, "omega": str, "set": str, "cells": "ints", "margin": float,
        "h": float, "window": float, "window_h": float, "k": float, "theta": float, "theta1": float,
        "theta2": float, "floor": float, "row_tolerance": float, "exterior_tolerance": float,
        "erosions": "ints", "max_iter": int, "min_tol": float, "rel_energy_tol": float, "xi_max": float,
        "small_bound": float,
    },
}

EXPERIMENT_FIELDS = ("name", "grid", "tolerance", "target_note")


def parse_value(section: str, key: str, text):
    """Typed value of section.key; unknown names are rejected"""
    if section not in SCHEMA:
        raise InvalidInputError(f"unknown config section [{section}]")
    if key not in SCHEMA[section]:
        raise InvalidInputError(f"unknown config key '{key}' in [{section}]")
    kind = SCHEMA[section][key]
    if not isinstance(text, str):
        return text
    try:
        return PARSERS[kind](text.strip())
    except ValueError as e:
        raise InvalidInputError(f"bad value for '{key}' in [{section}]: {str(e)}")


def empty_config() -> Dict[str, Dict[str, Any]]:
    return {section: {} for section in SCHEMA}


def load_config(path: Optional[str]) -> Dict[str, Dict[str, Any]]:
    """Read a [section] key = value file into typed dicts"""
    config = empty_config()
    if path is None:
        return config
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as e:
        raise InvalidInputError(f"cannot read config file {path}: {str(e)}")
    except configparser.Error as e:
        raise InvalidInputError(f"malformed config file {path}: {str(e)}")

    for section in parser.sections():
        for key, text in parser.items(section):
            config.setdefault(section, {})
            config[section][key] = parse_value(section, key, text)
    logger.info(f"Loaded config {path}: {sum(len(v) for v in config.values())} keys")
    return config


def merge_overrides(config: Dict[str, Dict[str, Any]], overrides: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Apply 'section.key' overrides (CLI flags) that are not None"""
    for name, value in overrides.items():
        if value is None or "." not in name:
            continue
        section, key = name.split(".", 1)
        config.setdefault(section, {})
        config[section][key] = parse_value(section, key, value)
    return config


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    return str(value)


def write_config(path, config: Dict[str, Dict[str, Any]]) -> Path:
    """Write the resolved config; floats use repr so a rerun reads back identical values"""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SCHEMA:
        values = config.get(section, {})
        if values:
            parser[section] = {key: _format(values[key]) for key in sorted(values)}
    with open(path, "w") as f:
        parser.write(f)
    logger.info(f"Effective config written: {path}")
    return path
