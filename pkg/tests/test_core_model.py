import numpy as np
import pytest
from pydantic import ValidationError

from config import Settings
from models.domain import Domain, parse_domain
from models.field import ScalarField, ValueRange
from models.geometry import Ball, Box, Complement, EmptySet, HalfSpace, Intersection, Union, parse_set
from models.kernel import KernelMode, KernelSpec, NearRule
from schemas.energy import EnergyBreakdown, EnergySpec, EnergyTag, LambdaSchedule
from schemas.experiment import Experiment, ExperimentName, SweepReport, SweepRow, Verdict
from schemas.minimize import MinimizeConfig


class TestDomain:
    def test_box_geometry(self):
        domain = Domain.box((0.0, -1.0), (2.0, 1.0), (4, 8))
        assert domain.dim == 2
        assert np.allclose(domain.spacing, [0.5, 0.25])
        assert domain.cell_volume == pytest.approx(0.125)
        assert domain.volume == pytest.approx(4.0)
        assert domain.cell_centers().shape == (4, 8, 2)
        assert domain.omega_mask().all()

    def test_scalar_cells_are_broadcast(self):
        assert Domain.box((0.0, 0.0), (1.0, 1.0), 16).cells == (16, 16)

    def test_ball_mask_excludes_corners(self):
        domain = Domain.ball((0.0, 0.0), 1.0, 32)
        mask = domain.omega_mask()
        assert not mask[0, 0]
        assert mask[16, 16]
        assert domain.volume == pytest.approx(np.pi)

    def test_default_margin_is_four_diameters(self, interval):
        assert interval.exterior_margin == pytest.approx(8.0)
        assert interval.padding() == (1024,)

    @pytest.mark.parametrize("kwargs", [
        dict(lower=(0.0,), upper=(0.0,), cells=(4,)),
        dict(lower=(0.0,), upper=(1.0,), cells=(0,)),
        dict(lower=(0.0,) * 4, upper=(1.0,) * 4, cells=(2, 2, 2, 2)),
        dict(lower=(0.0,), upper=(1.0,), cells=(4,), margin=-1.0),
    ])
    def test_rejects_bad_boxes(self, kwargs):
        with pytest.raises(ValidationError):
            Domain(**kwargs)

    def test_refined_keeps_bounds(self, unit_square):
        fine = unit_square.refined(2)
        assert fine.cells == (64, 64)
        assert np.allclose(fine.extents, unit_square.extents)

    def test_parse_domain(self):
        box = parse_domain("box:0,1,-1,1", [8, 16])
        assert box.cells == (8, 16)
        assert box.describe() == "box:0,1,-1,1"
        ball = parse_domain("ball:0,0,2", [10])
        assert ball.radius == 2.0 and ball.cells == (10, 10)

    @pytest.mark.parametrize("text", ["box:0,1,2", "ball:1", "disc:0,1"])
    def test_parse_domain_rejects(self, text):
        with pytest.raises(ValueError):
            parse_domain(text, [8])


class TestGeometry:
    def test_bare_halfspace_is_positive_axis(self):
        E = parse_set("halfspace", 2)
        assert isinstance(E, HalfSpace)
        assert E.contains(np.array([[0.5, -3.0], [-0.5, 3.0]])).tolist() == [True, False]

    def test_composite_sets(self):
        E = parse_set("ball:0,0,1&!box:0,1,0,1|box:2,3,2,3", 2)
        assert isinstance(E, Union)
        assert isinstance(E.parts[0], Intersection)
        points = np.array([[-0.5, 0.0], [0.5, 0.5], [2.5, 2.5], [5.0, 5.0]])
        assert E.contains(points).tolist() == [True, False, True, False]

    def test_erosion(self):
        assert isinstance(Box((0.0,), (1.0,)).erode(0.6), EmptySet)
        assert Ball((0.0, 0.0), 1.0).erode(0.25).radius == pytest.approx(0.75)
        eroded = HalfSpace((-1.0,), 0.0).erode(0.1)
        assert eroded.contains(np.array([[0.05], [0.15]])).tolist() == [False, True]

    def test_signed_distance_sign(self):
        ball = Ball((0.0, 0.0), 1.0)
        d = ball.signed_distance(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert d.tolist() == pytest.approx([-1.0, 1.0])
        assert Complement(ball).contains(np.array([[2.0, 0.0]]))[0]

    @pytest.mark.parametrize("text", ["box:0,1", "ball:0,1", "wedge:1"])
    def test_parse_set_rejects(self, text):
        with pytest.raises(ValueError):
            parse_set(text, 2)


class TestScalarField:
    def test_values_are_frozen(self, interval):
        u = ScalarField(np.zeros(256), interval)
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_range_violation(self, interval):
        with pytest.raises(ValueError):
            ScalarField(np.full(256, 1.5), interval)
        with pytest.raises(ValueError):
            ScalarField(np.full(256, -0.5), interval, value_range=ValueRange.UNIT)

    def test_shape_mismatch(self, interval):
        with pytest.raises(ValueError):
            ScalarField(np.zeros(10), interval)

    def test_exterior_datum(self, interval, right_half_line):
        u = ScalarField(np.zeros(256), interval, exterior=right_half_line)
        assert u.datum_at(np.array([[2.0], [-2.0]])).tolist() == [1.0, -1.0]
        assert u.datum_levels() == (-1.0, 1.0)
        constant = ScalarField(np.zeros(256), interval, exterior=0.5)
        assert constant.datum_levels() == (0.5,)

    def test_with_omega_values(self, interval):
        u = ScalarField(np.zeros(256), interval)
        v = u.with_omega_values(np.full(256, 0.25))
        assert v.values[3] == 0.25 and u.values[3] == 0.0


class TestSchemas:
    def test_energy_spec_bounds(self):
        with pytest.raises(ValidationError):
            EnergySpec(tag=EnergyTag.MM, eps=0.0)
        with pytest.raises(ValidationError):
            EnergySpec(tag=EnergyTag.F_FULL, s=1.0)
        with pytest.raises(ValidationError):
            EnergySpec(tag=EnergyTag.J_EPS_S, sigma=1.5)
        with pytest.raises(ValidationError):
            EnergySpec(tag=EnergyTag.F_FULL, s=0.5, eps=2.0)

    def test_regime_weights(self):
        assert EnergySpec(tag=EnergyTag.F_FULL, eps=0.25, s=0.25).regime_weights() == pytest.approx((1.0, 1.0))
        kin, pot = EnergySpec(tag=EnergyTag.F_FULL, eps=0.5, s=0.75).regime_weights()
        assert kin == pytest.approx(0.5 ** 0.5)
        assert pot == pytest.approx(1.0)

    def test_lambda_schedules(self):
        spec = EnergySpec(tag=EnergyTag.ABS_1D, eps=0.5, k=2.0, schedule=LambdaSchedule.EXPONENTIAL)
        assert spec.lambda_eps() == pytest.approx(np.exp(4.0))
        spec = EnergySpec(tag=EnergyTag.BOUNDARY_MODICA, eps=0.1, schedule=LambdaSchedule.LOGARITHMIC)
        assert spec.lambda_eps() == pytest.approx(1.0 / (0.1 * np.log(10.0)))

    def test_breakdown_total_must_add_up(self):
        with pytest.raises(ValidationError):
            EnergyBreakdown(tag="MM", total=3.0, kinetic=1.0, potential=1.0)
        assert EnergyBreakdown.assemble(EnergyTag.MM, 1.0, 2.0).total == 3.0

    def test_minimize_config_steps(self):
        with pytest.raises(ValidationError):
            MinimizeConfig(step_size=1e-3, min_step=1e-2)

    def test_experiment_grid_must_be_monotone(self):
        with pytest.raises(ValidationError):
            Experiment(name=ExperimentName.BBM_LIMIT, grid=[0.3, 0.4, 0.35])
        assert Experiment(name=ExperimentName.GAMMA_EPS_LIMIT, grid=[0.2, 0.1]).grid == [0.2, 0.1]

    def test_verdict_rules(self):
        report = SweepReport(experiment=ExperimentName.BBM_LIMIT, tolerance=0.01)
        assert report.decide() == Verdict.INCONCLUSIVE
        report.checks = {"a": True, "b": False}
        assert report.decide() == Verdict.FAIL
        report.checks = {"a": True}
        assert report.decide() == Verdict.PASS
        report.rows = [SweepRow(parameter=0.3, flagged=True)]
        assert report.decide() == Verdict.INCONCLUSIVE
        report.rows = []
        report.flagged = True
        assert report.decide() == Verdict.INCONCLUSIVE

    def test_kernel_spec(self):
        assert KernelSpec(0.25, 2).default_rule == NearRule.EXACT
        assert KernelSpec(0.75, 1).default_rule == NearRule.TAYLOR
        assert KernelSpec(0.25, 1, KernelMode.ABSOLUTE).default_rule == NearRule.TAYLOR_ABS
        with pytest.raises(ValueError):
            KernelSpec(0.5, 1, KernelMode.SET)
        with pytest.raises(ValueError):
            KernelSpec(0.25, 1, truncation=0.0)


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("PHASELAB_THREADS", "4")
    monkeypatch.setenv("PHASELAB_CACHE_ENABLED", "true")
    fresh = Settings()
    assert fresh.THREADS == 4
    assert fresh.CACHE_ENABLED is True
