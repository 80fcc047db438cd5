import logging

from services.file_service import FileService
from services.spectral_service import SpectralService
from utils.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

COMMAND = "multiplier"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="tabulate the Fourier symbol S_s")
    parser.add_argument("--s", dest="energy.s")
    parser.add_argument("--xi-max", dest="energy.xi_max")
    parser.add_argument("--count", dest="energy.count", help="number of |ξ| samples")
    parser.set_defaults(handler=run)
    return parser


def run(config, rc) -> dict:
    energy = config["energy"]
    if "s" not in energy:
        raise InvalidInputError("missing 's' in [energy]")
    s = energy["s"]
    xi_max = energy.setdefault("xi_max", 50.0)
    count = energy.setdefault("count", 501)
    out = FileService.ensure_output_dir(rc.output_dir)
    rows = SpectralService.multiplier_table(s, xi_max, count)
    FileService.write_multiplier_csv(out / "multiplier.csv", rows)
    print(f"S_{s:g} on [0, {xi_max:g}]: {count} samples, S(xi_max) = {rows[-1][2]:.10g}")
    return {"command": COMMAND, "s": s, "xi_max": xi_max, "count": count, "exit_code": 0}
