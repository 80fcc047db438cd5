import logging
from pathlib import Path

from schemas.experiment import Verdict
from services.file_service import FileService

logger = logging.getLogger(__name__)

COMMAND = "report"


def register(subparsers, parents=()):
    parser = subparsers.add_parser(COMMAND, parents=list(parents), help="collect stored sweep reports into one summary")
    parser.add_argument("--input-dir", dest="run.input_dir", help="directory holding sweep_*.json (default: output dir)")
    parser.set_defaults(handler=run)
    return parser


def run(config, rc) -> dict:
    out = FileService.ensure_output_dir(rc.output_dir)
    input_dir = config["run"].get("input_dir")
    source = Path(input_dir) if input_dir else out
    paths = sorted(source.glob("sweep_*.json"))
    if not paths:
        logger.warning(f"No sweep reports found in {source}")
    reports = [FileService.read_sweep_report(p) for p in paths]
    FileService.write_sweep_csv(out / "report.csv", reports)
    for report in reports:
        print(report.summary_line())
    verdicts = {r.experiment.value: r.verdict.value for r in reports}
    passed = bool(reports) and all(r.verdict == Verdict.PASS for r in reports)
    return {"command": COMMAND, "verdicts": verdicts, "exit_code": 0 if passed else 1}
