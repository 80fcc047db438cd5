import logging

from services.file_service import FileService
from services.minimize_service import MinimizeService
from utils.dependencies import get_domain, get_energy_spec, get_field, get_minimize_config, get_set
from utils.exceptions import NumericalError

logger = logging.getLogger(__name__)

COMMAND = "minimize"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="projected gradient descent on a field energy")
    parser.add_argument("--tag", dest="energy.tag")
    parser.add_argument("--eps", dest="energy.eps")
    parser.add_argument("--s", dest="energy.s")
    parser.add_argument("--sigma", dest="energy.sigma")
    parser.add_argument("--set", dest="domain.set", help="exterior datum and seed geometry")
    parser.add_argument("--omega", dest="domain.omega")
    parser.add_argument("--cells", dest="domain.cells")
    parser.add_argument("--field", dest="domain.field", help="start from this field file")
    parser.add_argument("--seed", dest="minimize.seed", help="voxelized, linear, constant or recovery")
    parser.add_argument("--max-iter", dest="minimize.max_iter")
    parser.add_argument("--tol", dest="minimize.tol")
    parser.set_defaults(handler=run)
    return parser


def run(config, rc) -> dict:
    spec = get_energy_spec(config)
    omega = get_domain(config)
    cfg = get_minimize_config(config)
    out = FileService.ensure_output_dir(rc.output_dir)

    u0 = get_field(config, omega)
    if u0 is None:
        E = get_set(config, omega.dim)
        u0 = MinimizeService.seed(cfg, E, omega, spec.eps, spec.well, config["domain"].get("outer_radius"))

    part = config["energy"].get("part")
    try:
        result = MinimizeService.minimize(spec, u0, cfg, part, config["energy"].get("lam"))
    except NumericalError as e:
        if e.trace:
            FileService.write_trace_csv(out / "trace.csv", e.trace)
        raise

    FileService.write_trace_csv(out / "trace.csv", result.trace)
    FileService.write_field(out / "field.bin", result.field)
    FileService.write_energy_csv(out / "energy.csv", [(result.breakdown, spec)])
    print(f"{result.energy:.15g} ({result.reason})")
    return {"command": COMMAND, "tag": spec.tag.value, "energy": result.energy, "converged": result.converged,
            "reason": result.reason, "iterations": len(result.trace) - 1, "exit_code": 0}
