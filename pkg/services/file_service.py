import csv
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from models.domain import Domain
from models.field import ScalarField, ValueRange
from models.interface import InterfaceMesh
from schemas.energy import ENERGY_CSV_HEADER, EnergyBreakdown, EnergySpec
from schemas.experiment import SweepReport
from schemas.minimize import IterationRecord
from utils.exceptions import ToolkitException, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

HEADER_KEYS = ("dim", "extents", "cells", "range")
TRACE_CSV_HEADER = ["iter", "energy", "grad_norm", "step"]
SWEEP_CSV_HEADER = ["experiment", "parameter", "quantity", "measured", "reference", "rel_error", "flagged"]
MULTIPLIER_CSV_HEADER = ["s", "xi", "S"]


class FileService:

    @staticmethod
    def ensure_output_dir(output_dir) -> Path:
        """Create the output directory and check that it is writable"""
        path = Path(output_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
            marker = path / ".write_check"
            marker.write_text("")
            marker.unlink()
        except OSError as e:
            raise InvalidInputError(f"output directory {path} is not writable: {str(e)}")
        return path

    @staticmethod
    def write_field(path, u: ScalarField) -> Path:
        """Text header (dim, extents, cells, range) then little-endian float64 values in row-major order"""
        path = Path(path)
        domain = u.domain
        header = [
            f"dim {domain.dim}",
            "extents " + " ".join(repr(float(x)) for x in domain.extents),
            "cells " + " ".join(str(c) for c in domain.cells),
            f"range {u.value_range.value}",
        ]
        try:
            with open(path, "wb") as f:
                f.write(("\n".join(header) + "\n").encode("ascii"))
                f.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C"))
            logger.info(f"Field written: {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing field file: {str(e)}", exc_info=True)
            raise NumericalError(f"Failed to write field file {path}")

    @staticmethod
    def read_field(path, domain: Optional[Domain] = None, exterior=None) -> ScalarField:
        """Inverse of write_field; without a domain the box [0, extents] is assumed"""
        path = Path(path)
        logger.info(f"Reading field file: {path}")
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise InvalidInputError(f"cannot read field file {path}: {str(e)}")

        try:
            header = {}
            offset = 0
            for key in HEADER_KEYS:
                end = raw.index(b"\n", offset)
                name, _, value = raw[offset:end].decode("ascii").partition(" ")
                if name != key:
                    raise InvalidInputError(f"field file {path}: expected '{key}' header, found '{name}'")
                header[key] = value
                offset = end + 1
            dim = int(header["dim"])
            extents = [float(x) for x in header["extents"].split()]
            cells = tuple(int(x) for x in header["cells"].split())
            value_range = ValueRange(header["range"])
            if len(extents) != dim or len(cells) != dim:
                raise InvalidInputError(f"field file {path}: header dimensions disagree")
            values = np.frombuffer(raw[offset:], dtype="<f8")
            if values.size != int(np.prod(cells)):
                raise InvalidInputError(f"field file {path}: expected {int(np.prod(cells))} values, "
                                        f"found {values.size}")
            if domain is None:
                domain = Domain.box([0.0] * dim, extents, cells)
            elif tuple(domain.cells) != cells or not np.allclose(domain.extents, extents, rtol=1e-12):
                raise InvalidInputError(f"field file {path} does not match {domain.describe()}")
            return ScalarField(values.reshape(cells).astype(float), domain, exterior=exterior,
                               value_range=value_range)

        except ToolkitException:
            raise
        except (ValueError, UnicodeDecodeError) as e:
            raise InvalidInputError(f"malformed field file {path}: {str(e)}")

    @staticmethod
    def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = Path(path)
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                count = 0
                for row in rows:
                    writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
                    count += 1
            logger.info(f"Wrote {count} rows to {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing {path}: {str(e)}", exc_info=True)
            raise NumericalError(f"Failed to write {path}")

    @staticmethod
    def write_energy_csv(path, entries: Sequence[tuple]) -> Path:
        """Rows of (EnergyBreakdown, EnergySpec or None)"""
        return FileService._write_csv(path, ENERGY_CSV_HEADER, (b.csv_row(spec) for b, spec in entries))

    @staticmethod
    def write_trace_csv(path, trace: Sequence[IterationRecord]) -> Path:
        return FileService._write_csv(path, TRACE_CSV_HEADER,
                                      ([r.iteration, r.energy, r.grad_norm, r.step] for r in trace))

    @staticmethod
    def write_sweep_csv(path, reports: Sequence[SweepReport]) -> Path:
        from services.gamma_lab_service import report_rows
        rows = []
        for report in reports:
            rows.extend([r[k] for k in SWEEP_CSV_HEADER] for r in report_rows(report))
        return FileService._write_csv(path, SWEEP_CSV_HEADER, rows)

    @staticmethod
    def write_mesh_csv(path, mesh: InterfaceMesh) -> Path:
        dim = mesh.centers.shape[1] if mesh.centers.ndim == 2 else 1
        header = [f"x{i + 1}" for i in range(dim)] + ["measure", "tag"]
        return FileService._write_csv(path, header, mesh.rows())

    @staticmethod
    def write_multiplier_csv(path, rows: Sequence[tuple]) -> Path:
        return FileService._write_csv(path, MULTIPLIER_CSV_HEADER, rows)

    @staticmethod
    def write_value_csv(path, header: List[str], rows: Iterable[Sequence]) -> Path:
        return FileService._write_csv(path, header, rows)

    @staticmethod
    def write_summary(path, summary: dict) -> Path:
        """Machine-readable run summary"""
        path = Path(path)
        try:
            path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=str))
            logger.info(f"Summary written: {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing summary: {str(e)}", exc_info=True)
            raise NumericalError(f"Failed to write summary {path}")

    @staticmethod
    def read_summary(path) -> dict:
        path = Path(path)
        try:
            return json.loads(path.read_text())
        except (OSError, ValueError) as e:
            raise InvalidInputError(f"cannot read summary {path}: {str(e)}")

    @staticmethod
    def read_sweep_report(path) -> SweepReport:
        """A report stored as JSON by the sweep command"""
        path = Path(path)
        try:
            return SweepReport.model_validate_json(path.read_text())
        except (OSError, ValueError) as e:
            raise InvalidInputError(f"cannot read sweep report {path}: {str(e)}")

    @staticmethod
    def write_sweep_report(path, report: SweepReport) -> Path:
        path = Path(path)
        path.write_text(report.model_dump_json(indent=2))
        return path
