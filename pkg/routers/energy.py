import logging

from models.field import ScalarField, ValueRange
from schemas.energy import EnergyTag
from services.energy_service import CapillarityKind, EnergyService
from services.file_service import FileService
from services.geometry_service import GeometryService
from utils.dependencies import (get_boundary_field, get_domain, get_energy_spec, get_exterior, get_field,
                                get_set, get_value_range)
from utils.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

COMMAND = "energy"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="evaluate one energy functional")
    parser.add_argument("--tag", dest="energy.tag", help="MM, F_int, F_ext, F_full, J_raw, J_eps_s, ...")
    parser.add_argument("--eps", dest="energy.eps")
    parser.add_argument("--s", dest="energy.s")
    parser.add_argument("--sigma", dest="energy.sigma")
    parser.add_argument("--k", dest="energy.k")
    parser.add_argument("--c", dest="energy.c", help="line-tension coefficient")
    parser.add_argument("--lam", dest="energy.lam", help="boundary weight for BOUNDARY_MODICA")
    parser.add_argument("--part", dest="energy.part")
    parser.add_argument("--set", dest="domain.set")
    parser.add_argument("--boundary-set", dest="domain.boundary_set", help="where the boundary datum v is up")
    parser.add_argument("--omega", dest="domain.omega")
    parser.add_argument("--cells", dest="domain.cells")
    parser.add_argument("--field", dest="domain.field", help="field file to evaluate")
    parser.set_defaults(handler=run)
    return parser


def _voxel_field(config, omega) -> ScalarField:
    """Indicator of E in the configured value range"""
    E = get_set(config, omega.dim)
    u = GeometryService.voxelize(E, omega)
    if get_value_range(config) == ValueRange.UNIT:
        return ScalarField((u.values + 1) / 2, omega, exterior=get_exterior(config, omega.dim),
                           value_range=ValueRange.UNIT)
    return ScalarField(u.values, omega, exterior=get_exterior(config, omega.dim))


def run(config, rc) -> dict:
    spec = get_energy_spec(config)
    omega = get_domain(config)
    out = FileService.ensure_output_dir(rc.output_dir)
    tag = spec.tag
    logger.info(f"Energy command: {tag.value}")

    if tag.is_set_functional:
        E = get_set(config, omega.dim)
        if tag == EnergyTag.CAPILLARY_LOCAL:
            value = EnergyService.capillarity(E, omega, spec.sigma, CapillarityKind.LOCAL)
        elif tag == EnergyTag.CAPILLARY_FRAC:
            value = EnergyService.capillarity(E, omega, spec.sigma, CapillarityKind.FRACTIONAL, spec.s)
        elif tag == EnergyTag.G_SHARP:
            value = EnergyService.g_sharp(E, omega, spec.sigma, spec.c)
        else:
            v = get_boundary_field(config, omega, spec.well)
            if v is None:
                raise InvalidInputError("PHI_LINE needs 'boundary_set' in [domain]")
            value = EnergyService.phi_line_tension(_voxel_field(config, omega), v, omega, spec.sigma, spec.c,
                                                   spec.well)
        FileService.write_value_csv(out / "energy.csv", ["tag", "eps", "s", "sigma", "k", "c", "total"],
                                    [[tag.value, "", spec.s, spec.sigma, spec.k, spec.c, value]])
        print(f"{value:.15g}")
        return {"command": COMMAND, "tag": tag.value, "total": value, "exit_code": 0}

    u = get_field(config, omega) or _voxel_field(config, omega)
    part = config["energy"].get("part")
    breakdown = EnergyService.evaluate(spec, u, part, config["energy"].get("lam"))
    FileService.write_energy_csv(out / "energy.csv", [(breakdown, spec)])
    print(f"{breakdown.total:.15g}")
    return {"command": COMMAND, "tag": tag.value, "total": breakdown.total, "kinetic": breakdown.kinetic,
            "potential": breakdown.potential, "boundary": breakdown.boundary,
            "components": breakdown.components, "exit_code": 0}
