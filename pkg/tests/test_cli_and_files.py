import csv
import json
import logging
import math

import numpy as np
import pytest

from config import settings
from main import parse_and_dispatch
from models.domain import Domain
from models.field import ScalarField, ValueRange
from services.file_service import FileService
from utils.config_file import load_config, merge_overrides, write_config
from utils.exceptions import InvalidInputError, status


@pytest.fixture
def cli(monkeypatch, tmp_path):
    """Runs a command; the run's log handlers are closed and the root logger restored afterwards"""
    monkeypatch.setattr(settings, "CACHE_DIR", str(tmp_path / "cache"))
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level

    def run(*argv):
        return parse_and_dispatch([str(a) for a in argv])

    yield run
    for handler in list(root.handlers):
        if handler not in saved_handlers:
            handler.close()
            root.removeHandler(handler)
    for handler in saved_handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(saved_level)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestCommands:
    def test_fractional_perimeter(self, cli, tmp_path, capsys):
        out = tmp_path / "run"
        code = cli("perimeter", "--set", "box:0,0.5", "--omega", "box:0,1", "--s", "0.25", "--output-dir", out)
        assert code == status.EXIT_OK
        rows = read_csv(out / "perimeter.csv")
        assert float(rows[0]["value"]) == pytest.approx(8 * math.sqrt(0.5) - 4, rel=1e-5)
        assert rows[0]["part"] == "interior"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["exit_code"] == 0
        assert (out / "effective_config.ini").exists()
        assert (out / "logs" / "phaselab.log").exists()
        assert f"{float(rows[0]['value']):.15g}" in capsys.readouterr().out

    def test_classical_perimeter_writes_mesh(self, cli, tmp_path):
        out = tmp_path / "run"
        code = cli("perimeter", "--set", "box:0,0.5,0,1", "--omega", "box:0,1,0,1", "--cells", "32",
                   "--output-dir", out)
        assert code == status.EXIT_OK
        assert float(read_csv(out / "perimeter.csv")[0]["value"]) == pytest.approx(1.0)
        assert len(read_csv(out / "interface_mesh.csv")) > 0

    def test_local_capillarity(self, cli, tmp_path):
        out = tmp_path / "run"
        code = cli("energy", "--tag", "CAPILLARY_LOCAL", "--set", "box:0,0.5,0,1", "--omega", "box:0,1,0,1",
                   "--cells", "32", "--sigma", "0.5", "--output-dir", out)
        assert code == status.EXIT_OK
        assert json.loads((out / "summary.json").read_text())["total"] == pytest.approx(2.0)

    def test_minimize_writes_trace_and_field(self, cli, tmp_path):
        out = tmp_path / "run"
        code = cli("minimize", "--tag", "MM", "--eps", "0.1", "--set", "halfspace", "--omega", "box:-1,1",
                   "--cells", "64", "--seed", "recovery", "--max-iter", "20", "--output-dir", out)
        assert code == status.EXIT_OK
        trace = read_csv(out / "trace.csv")
        energies = [float(r["energy"]) for r in trace]
        assert all(b <= a for a, b in zip(energies[:-1], energies[1:]))
        u = FileService.read_field(out / "field.bin")
        assert u.domain.cells == (64,)
        assert json.loads((out / "summary.json").read_text())["energy"] == pytest.approx(energies[-1])

    def test_multiplier_table(self, cli, tmp_path):
        out = tmp_path / "run"
        code = cli("multiplier", "--s", "0.5", "--xi-max", "20", "--count", "41", "--output-dir", out)
        assert code == status.EXIT_OK
        rows = read_csv(out / "multiplier.csv")
        assert len(rows) == 41
        for row in rows[1:]:
            xi = float(row["xi"])
            assert float(row["S"]) == pytest.approx(xi * math.tanh(xi), rel=1e-10)

    def test_sweep_and_report(self, cli, tmp_path):
        out = tmp_path / "run"
        assert cli("sweep", "--experiment", "MULTIPLIER_ASYMPTOTICS", "--output-dir", out) == status.EXIT_OK
        assert (out / "sweep_MULTIPLIER_ASYMPTOTICS.json").exists()
        assert cli("report", "--output-dir", out) == status.EXIT_OK
        rows = read_csv(out / "report.csv")
        assert {r["experiment"] for r in rows} == {"MULTIPLIER_ASYMPTOTICS"}

    def test_report_without_sweeps_fails(self, cli, tmp_path):
        assert cli("report", "--output-dir", tmp_path / "empty") == status.EXIT_FAILED


class TestUsageErrors:
    def test_unknown_command(self, cli):
        assert cli("integrate") == status.EXIT_USAGE

    def test_help_is_not_an_error(self, cli):
        assert cli("--help") == status.EXIT_OK

    def test_unknown_config_key(self, cli, tmp_path, capsys):
        config = tmp_path / "run.ini"
        config.write_text("[domain]\nomega = box:0,1\nshape = round\n")
        assert cli("perimeter", "--config", config, "--output-dir", tmp_path / "run") == status.EXIT_USAGE
        assert "shape" in capsys.readouterr().err

    def test_missing_set(self, cli, tmp_path, capsys):
        assert cli("perimeter", "--omega", "box:0,1", "--output-dir", tmp_path / "run") == status.EXIT_USAGE
        assert "set" in capsys.readouterr().err

    def test_s_outside_range(self, cli, tmp_path):
        code = cli("perimeter", "--set", "halfspace", "--omega", "box:-1,1", "--s", "0.7",
                   "--output-dir", tmp_path / "run")
        assert code == status.EXIT_USAGE


class TestReproducibility:
    def test_rerun_from_effective_config(self, cli, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert cli("perimeter", "--set", "halfspace", "--omega", "box:-1,1", "--cells", "128", "--s", "0.3",
                   "--output-dir", first) == status.EXIT_OK
        assert cli("perimeter", "--config", first / "effective_config.ini", "--output-dir", second) == status.EXIT_OK
        assert (first / "perimeter.csv").read_bytes() == (second / "perimeter.csv").read_bytes()

    def test_config_round_trip(self, tmp_path):
        config = load_config(None)
        merge_overrides(config, {"energy.eps": "0.1", "energy.rescaled": "yes", "domain.cells": "16,32",
                                 "experiment.grid": "0.3,0.4", "run.threads": None, "command": "energy"})
        path = write_config(tmp_path / "run.ini", config)
        loaded = load_config(str(path))
        assert loaded["energy"] == {"eps": 0.1, "rescaled": True}
        assert loaded["domain"]["cells"] == [16, 32]
        assert loaded["experiment"]["grid"] == [0.3, 0.4]
        assert "threads" not in loaded["run"]

    def test_bad_values_are_rejected(self):
        with pytest.raises(InvalidInputError):
            merge_overrides(load_config(None), {"energy.eps": "small"})
        with pytest.raises(InvalidInputError):
            merge_overrides(load_config(None), {"physics.eps": "0.1"})


class TestFieldFiles:
    def test_write_and_read(self, tmp_path, rng):
        domain = Domain.box((0.0, 0.0), (2.0, 1.0), (8, 4))
        u = ScalarField(rng.uniform(0.0, 1.0, (8, 4)), domain, value_range=ValueRange.UNIT)
        path = FileService.write_field(tmp_path / "u.bin", u)
        v = FileService.read_field(path)
        assert np.array_equal(v.values, u.values)
        assert v.value_range == ValueRange.UNIT
        assert v.domain.cells == (8, 4)
        FileService.write_field(tmp_path / "v.bin", v)
        assert (tmp_path / "v.bin").read_bytes() == path.read_bytes()

    def test_header_layout(self, tmp_path):
        u = ScalarField(np.zeros(3), Domain.box(0.0, 1.5, 3))
        raw = FileService.write_field(tmp_path / "u.bin", u).read_bytes()
        assert raw.startswith(b"dim 1\nextents 1.5\ncells 3\nrange [-1,1]\n")
        assert len(raw) == len(b"dim 1\nextents 1.5\ncells 3\nrange [-1,1]\n") + 3 * 8

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"dim 1\ncells 3\nextents 1.0\nrange [-1,1]\n" + bytes(24))
        with pytest.raises(InvalidInputError):
            FileService.read_field(path)

    def test_truncated_values(self, tmp_path):
        u = ScalarField(np.zeros(4), Domain.box(0.0, 1.0, 4))
        path = FileService.write_field(tmp_path / "u.bin", u)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(InvalidInputError):
            FileService.read_field(path)

    def test_domain_mismatch(self, tmp_path):
        u = ScalarField(np.zeros(4), Domain.box(0.0, 1.0, 4))
        path = FileService.write_field(tmp_path / "u.bin", u)
        with pytest.raises(InvalidInputError):
            FileService.read_field(path, Domain.box(0.0, 1.0, 8))
