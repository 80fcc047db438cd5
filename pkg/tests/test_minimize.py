import numpy as np
import pytest

from models.domain import Domain
from models.field import ScalarField, ValueRange
from models.geometry import HalfSpace
from models.potential import QuarticWell
from schemas.energy import EnergySpec, EnergyTag, LambdaSchedule
from schemas.minimize import MinimizeConfig, SeedKind
from services.energy_service import EnergyService
from services.minimize_service import MinimizeService
from utils.exceptions import InvalidInputError


@pytest.fixture
def small_interval():
    return Domain.box(-1.0, 1.0, 16)


class TestGradient:
    @pytest.mark.parametrize("spec", [
        EnergySpec(tag=EnergyTag.MM, eps=0.2),
        EnergySpec(tag=EnergyTag.F_INT, eps=0.2, s=0.3),
        EnergySpec(tag=EnergyTag.F_EXT, eps=0.2, s=0.3),
        EnergySpec(tag=EnergyTag.F_FULL, eps=0.2, s=0.3),
        EnergySpec(tag=EnergyTag.F_FULL, eps=0.2, s=0.7),
        EnergySpec(tag=EnergyTag.J_RAW, eps=0.5, s=0.4),
        EnergySpec(tag=EnergyTag.J_EPS_S, eps=0.5, s=0.25, sigma=-0.5),
        EnergySpec(tag=EnergyTag.ABS_1D, eps=0.5, s=0.5, k=0.1),
        EnergySpec(tag=EnergyTag.BOUNDARY_MODICA, eps=0.1, schedule=LambdaSchedule.LOGARITHMIC,
                   boundary_well=QuarticWell()),
    ], ids=lambda spec: spec.tag.value)
    def test_matches_directional_derivative(self, rng, small_interval, spec):
        u = ScalarField(rng.uniform(-0.8, 0.8, 16), small_interval, exterior=HalfSpace((-1.0,), 0.0))
        direction = rng.normal(size=16)
        grad = MinimizeService.gradient(spec, u)
        t = 1e-6
        plus = EnergyService.evaluate(spec, u.with_values(u.values + t * direction)).total
        minus = EnergyService.evaluate(spec, u.with_values(u.values - t * direction)).total
        assert float(np.dot(grad, direction)) == pytest.approx((plus - minus) / (2 * t), rel=1e-5, abs=1e-8)

    def test_set_functionals_have_no_gradient(self, small_interval):
        u = ScalarField(np.zeros(16), small_interval)
        with pytest.raises(InvalidInputError):
            MinimizeService.gradient(EnergySpec(tag=EnergyTag.CAPILLARY_FRAC), u)

    def test_ball_domain_gradient_vanishes_outside_omega(self, rng):
        omega = Domain.ball((0.0, 0.0), 1.0, 12)
        u = ScalarField(rng.uniform(-0.8, 0.8, (12, 12)), omega, exterior=-1.0)
        grad = MinimizeService.gradient(EnergySpec(tag=EnergyTag.MM, eps=0.3), u)
        assert np.all(grad[~omega.omega_mask()] == 0.0)
        assert np.any(grad[omega.omega_mask()] != 0.0)


class TestMinimize:
    def test_energy_decreases(self, interval, right_half_line):
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.1)
        seed = MinimizeService.seed(MinimizeConfig(seed=SeedKind.LINEAR), right_half_line, interval)
        result = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=300, tol=1e-7))
        energies = [r.energy for r in result.trace]
        assert all(b <= a for a, b in zip(energies[:-1], energies[1:]))
        assert result.energy < energies[0]
        assert result.energy == pytest.approx(EnergyService.evaluate(spec, result.field).total)

    def test_values_stay_in_range(self, interval, right_half_line):
        spec = EnergySpec(tag=EnergyTag.F_FULL, eps=0.1, s=0.25)
        seed = MinimizeService.seed(MinimizeConfig(seed=SeedKind.VOXELIZED), right_half_line, interval)
        result = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=50, step_size=10.0))
        assert result.field.values.min() >= -1.0 and result.field.values.max() <= 1.0
        assert result.field.exterior is right_half_line

    def test_stops_on_energy_change(self, interval, right_half_line):
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.1)
        seed = MinimizeService.recovery_sequence(right_half_line, 0.1, domain=interval)
        result = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=500, tol=1e-14, rel_energy_tol=1e-6))
        assert result.converged
        assert result.reason == "energy change below tolerance"

    def test_minimized_transition_costs_interface_constant(self, right_half_line, well):
        omega = Domain.box(-1.0, 1.0, 4096)
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.01)
        seed = MinimizeService.recovery_sequence(right_half_line, 0.01, well, omega)
        result = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=500, rel_energy_tol=1e-10))
        assert result.energy == pytest.approx(4 / 3, rel=0.02)

    def test_iteration_cap(self, interval, right_half_line):
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.1)
        seed = MinimizeService.seed(MinimizeConfig(seed=SeedKind.LINEAR), right_half_line, interval)
        result = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=3, tol=1e-14))
        assert not result.converged
        assert len(result.trace) == 4

    def test_perturbation_moves_the_start(self, interval, right_half_line):
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.1)
        seed = MinimizeService.recovery_sequence(right_half_line, 0.1, domain=interval)
        plain = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=1))
        perturbed = MinimizeService.minimize(spec, seed, MinimizeConfig(max_iter=1, perturb=True,
                                                                        perturb_amplitude=0.05))
        assert perturbed.trace[0].energy != plain.trace[0].energy

    def test_set_functionals_cannot_be_minimized(self, small_interval):
        with pytest.raises(InvalidInputError):
            MinimizeService.minimize(EnergySpec(tag=EnergyTag.G_SHARP), ScalarField(np.zeros(16), small_interval))

    def test_project(self):
        values = np.array([-2.0, 0.5, 3.0])
        assert MinimizeService.project(values, ValueRange.SIGNED).tolist() == [-1.0, 0.5, 1.0]
        assert MinimizeService.project(values, ValueRange.UNIT).tolist() == [0.0, 0.5, 1.0]

    def test_odd_perturbation(self, interval):
        p = MinimizeService.odd_perturbation(interval, 0.1)
        assert np.allclose(p, -p[::-1])
        assert np.max(np.abs(p)) <= 0.1


class TestSeeds:
    def test_recovery_sequence(self, interval, right_half_line, well):
        u = MinimizeService.recovery_sequence(right_half_line, 0.1, well, interval)
        x = interval.cell_centers()[..., 0]
        assert np.allclose(u.values, np.tanh(x / 0.2), atol=1e-4)
        assert np.all(np.diff(u.values) > 0)
        assert u.exterior is right_half_line

    def test_unit_range_recovery(self, interval, right_half_line):
        u = MinimizeService.recovery_sequence(right_half_line, 0.1, QuarticWell((0.0, 1.0), 1.0), interval)
        assert u.value_range == ValueRange.UNIT
        assert u.values.min() >= 0.0

    def test_recovery_rejects(self, interval, right_half_line):
        with pytest.raises(InvalidInputError):
            MinimizeService.recovery_sequence(right_half_line, 0.1)
        with pytest.raises(InvalidInputError):
            MinimizeService.recovery_sequence(right_half_line, 0.0, domain=interval)
        with pytest.raises(InvalidInputError):
            MinimizeService.recovery_sequence(right_half_line, 0.1, QuarticWell((-2.0, 2.0)), interval)

    def test_composite_set_distance(self, interval):
        E = HalfSpace((-1.0,), 0.5) & HalfSpace((1.0,), 0.5)
        d = MinimizeService.signed_distance(E, interval)
        x = interval.cell_centers()[..., 0]
        assert np.allclose(d, np.abs(x) - 0.5, atol=interval.spacing[0])

    def test_seed_kinds(self, interval, right_half_line):
        linear = MinimizeService.seed(MinimizeConfig(seed=SeedKind.LINEAR), right_half_line, interval)
        assert linear.values[0] == pytest.approx(-1 + 1 / 256)
        constant = MinimizeService.seed(MinimizeConfig(seed=SeedKind.CONSTANT, seed_value=0.3), right_half_line,
                                        interval, outer_radius=4.0)
        assert np.all(constant.values == 0.3) and constant.outer_radius == 4.0
        recovery = MinimizeService.seed(MinimizeConfig(seed=SeedKind.RECOVERY), right_half_line, interval, eps=0.1)
        assert recovery.exterior is right_half_line
        with pytest.raises(InvalidInputError):
            MinimizeService.seed(MinimizeConfig(seed=SeedKind.RECOVERY), right_half_line, interval)
        with pytest.raises(InvalidInputError):
            MinimizeService.seed(MinimizeConfig(seed=SeedKind.CONSTANT, seed_value=2.0), right_half_line, interval)
