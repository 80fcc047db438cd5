import logging

from models.kernel import Part
from services.file_service import FileService
from services.geometry_service import GeometryService, PerimeterWhere
from services.kernel_service import KernelService
from utils.dependencies import get_domain, get_part, get_set
from utils.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

COMMAND = "perimeter"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="fractional or classical perimeter of a set")
    parser.add_argument("--set", dest="domain.set", help="set E, e.g. halfspace or ball:0,0,0.5")
    parser.add_argument("--omega", dest="domain.omega", help="container, box:lo,hi,... or ball:c...,r")
    parser.add_argument("--cells", dest="domain.cells", help="cells per axis, comma separated")
    parser.add_argument("--margin", dest="domain.margin", help="materialized exterior margin")
    parser.add_argument("--s", dest="energy.s", help="fractional order in (0, 1/2); omit for the classical perimeter")
    parser.add_argument("--part", dest="energy.part", help="interior, exterior or full (boundary for classical)")
    parser.set_defaults(handler=run)
    return parser


def run(config, rc) -> dict:
    """Per_s(E, Ω) by part, or H^{n-1} of ∂E inside Ω or on ∂Ω"""
    omega = get_domain(config)
    E = get_set(config, omega.dim)
    s = config["energy"].get("s")
    out = FileService.ensure_output_dir(rc.output_dir)

    if s is not None:
        part = get_part(config, Part.INTERIOR)
        config["energy"]["part"] = part.value
        value = KernelService.frac_perimeter(E, omega, s, part)
        label = part.value
    else:
        where = config["energy"].get("part", PerimeterWhere.INTERIOR.value)
        where = PerimeterWhere.BOUNDARY.value if where == Part.EXTERIOR.value else where
        try:
            where = PerimeterWhere(where)
        except ValueError:
            raise InvalidInputError(f"unknown perimeter part '{where}'")
        config["energy"]["part"] = where.value
        measurement = GeometryService.measure_perimeter(E, omega, where)
        value = measurement.value
        label = where.value
        FileService.write_mesh_csv(out / "interface_mesh.csv", GeometryService.interface_mesh(E, omega))
        if measurement.tangential:
            logger.warning("Boundary perimeter flagged: ∂E meets ∂Ω tangentially")

    FileService.write_value_csv(out / "perimeter.csv", ["set", "omega", "s", "part", "value"],
                                [[E.describe(), omega.describe(), "" if s is None else s, label, value]])
    print(f"{value:.15g}")
    return {"command": COMMAND, "value": value, "part": label, "s": s, "exit_code": 0}
