import logging

from schemas.experiment import Verdict
from services.file_service import FileService
from services.gamma_lab_service import GammaLabService
from utils.dependencies import get_experiment

logger = logging.getLogger(__name__)

COMMAND = "sweep"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="run a named convergence experiment")
    parser.add_argument("--experiment", dest="experiment.name", help="e.g. BBM_LIMIT, POINTWISE_S_LIMIT")
    parser.add_argument("--grid", dest="experiment.grid", help="parameter grid, comma separated")
    parser.add_argument("--tolerance", dest="experiment.tolerance")
    parser.set_defaults(handler=run)
    return parser


def run(config, rc) -> dict:
    experiment = get_experiment(config)
    out = FileService.ensure_output_dir(rc.output_dir)
    report = GammaLabService.run(experiment)
    name = experiment.name.value
    FileService.write_sweep_csv(out / f"sweep_{name}.csv", [report])
    FileService.write_sweep_report(out / f"sweep_{name}.json", report)
    print(report.summary_line())
    return {"command": COMMAND, "experiment": name, "verdict": report.verdict.value,
            "extrapolated": report.extrapolated, "checks": report.checks,
            "exit_code": 0 if report.verdict == Verdict.PASS else 1}
