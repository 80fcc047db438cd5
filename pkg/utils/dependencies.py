import logging
from typing import Any, Dict, Optional

import numpy as np

from config import settings
from models.domain import Domain, parse_domain
from models.field import ScalarField, ValueRange
from models.geometry import GeometricSet, parse_set
from models.interface import BoundaryField
from models.kernel import Part
from models.potential import QuarticWell
from schemas.energy import EnergySpec, EnergyTag
from schemas.experiment import Experiment
from schemas.minimize import MinimizeConfig
from schemas.run import Command, RunConfig
from utils.config_file import EXPERIMENT_FIELDS
from utils.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

Config = Dict[str, Dict[str, Any]]

RANGES = {"signed": ValueRange.SIGNED, "[-1,1]": ValueRange.SIGNED, "unit": ValueRange.UNIT, "[0,1]": ValueRange.UNIT}


def _invalid(e: Exception, what: str):
    return InvalidInputError(f"invalid {what}: {str(e)}")


def get_run_config(command: Command, config: Config, config_path: Optional[str]) -> RunConfig:
    """Resolve [run] and apply the thread and cache settings process-wide"""
    run = config["run"]
    try:
        rc = RunConfig(command=command, config_path=config_path,
                       output_dir=run.get("output_dir", settings.OUTPUT_DIR),
                       threads=run.get("threads", settings.THREADS),
                       cache_dir=run.get("cache_dir"))
    except ValueError as e:
        raise _invalid(e, "run settings")
    settings.THREADS = rc.threads
    if rc.cache_dir is not None:
        settings.CACHE_DIR = rc.cache_dir
        settings.CACHE_ENABLED = True
    run.setdefault("output_dir", rc.output_dir)
    run.setdefault("threads", rc.threads)
    return rc


def get_domain(config: Config) -> Domain:
    section = config["domain"]
    if "omega" not in section:
        raise InvalidInputError("missing 'omega' in [domain]")
    cells = section.setdefault("cells", [256])
    try:
        return parse_domain(section["omega"], cells, section.get("margin"))
    except ValueError as e:
        raise _invalid(e, "domain")


def get_set(config: Config, dim: int, key: str = "set", required: bool = True) -> Optional[GeometricSet]:
    text = config["domain"].get(key)
    if text is None:
        if required:
            raise InvalidInputError(f"missing '{key}' in [domain]")
        return None
    try:
        return parse_set(text, dim)
    except ValueError as e:
        raise _invalid(e, key)


def get_value_range(config: Config) -> ValueRange:
    text = config["domain"].get("range", "signed")
    if text not in RANGES:
        raise InvalidInputError(f"unknown value range '{text}'")
    return RANGES[text]


def get_exterior(config: Config, dim: int):
    """Exterior datum: a set, a constant, or the set E itself"""
    text = config["domain"].get("exterior")
    if text is None:
        return get_set(config, dim, required=False)
    if text.lower() == "none":
        return None
    try:
        return float(text)
    except ValueError:
        return get_set(config, dim, "exterior")


def get_field(config: Config, domain: Domain) -> Optional[ScalarField]:
    """Field read from [domain] field, if given"""
    path = config["domain"].get("field")
    if path is None:
        return None
    from services.file_service import FileService
    u = FileService.read_field(path, domain, exterior=get_exterior(config, domain.dim))
    outer = config["domain"].get("outer_radius")
    return ScalarField(u.values, domain, u.exterior, u.value_range, outer_radius=outer) if outer else u


def get_boundary_field(config: Config, domain: Domain, well) -> Optional[BoundaryField]:
    """Boundary datum v: upper well value where the boundary set contains the facet center"""
    B = get_set(config, domain.dim, "boundary_set", required=False)
    if B is None:
        return None
    from services.geometry_service import GeometryService
    facets = GeometryService.boundary_facets(domain)
    lo, hi = well.zeros
    return BoundaryField(np.where(B.contains(facets.centers), hi, lo), facets)


def get_well(config: Config):
    energy = config["energy"]
    try:
        return QuarticWell(tuple(energy.get("well_zeros", (-1.0, 1.0))), energy.get("well_scale", 0.25))
    except ValueError as e:
        raise _invalid(e, "well")


def get_part(config: Config, default: Part = Part.FULL) -> Part:
    try:
        return Part(config["energy"].get("part", default.value))
    except ValueError as e:
        raise _invalid(e, "part")


def get_energy_spec(config: Config) -> EnergySpec:
    energy = config["energy"]
    if "tag" not in energy:
        raise InvalidInputError("missing 'tag' in [energy]")
    fields = {k: energy[k] for k in ("eps", "s", "sigma", "k", "c", "schedule") if k in energy}
    try:
        return EnergySpec(tag=EnergyTag(energy["tag"]), well=get_well(config), **fields)
    except ValueError as e:
        raise _invalid(e, "energy")


def get_minimize_config(config: Config) -> MinimizeConfig:
    try:
        return MinimizeConfig(**config["minimize"])
    except ValueError as e:
        raise _invalid(e, "minimize settings")


def get_experiment(config: Config) -> Experiment:
    from services.gamma_lab_service import default_experiment
    section = config["experiment"]
    if "name" not in section:
        raise InvalidInputError("missing 'name' in [experiment]")
    params = {k: v for k, v in section.items() if k not in EXPERIMENT_FIELDS}
    try:
        exp = default_experiment(section["name"], grid=section.get("grid"), tolerance=section.get("tolerance"),
                                 target_note=section.get("target_note"), params=params or None)
    except ValueError as e:
        raise _invalid(e, "experiment")
    section["grid"] = list(exp.grid)
    section["tolerance"] = exp.tolerance
    return exp
