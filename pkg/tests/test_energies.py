import numpy as np
import pytest

from models.domain import Domain
from models.field import ScalarField
from models.geometry import Box
from models.interface import BoundaryField
from models.kernel import Part
from models.potential import CallableWell, QuarticWell
from schemas.energy import EnergySpec, EnergyTag, LambdaSchedule
from services.energy_service import CapillarityKind, EnergyService
from services.geometry_service import GeometryService
from services.kernel_service import KernelService
from services.minimize_service import MinimizeService
from services.potential_service import PotentialKind, PotentialService
from utils.exceptions import InvalidInputError, UnsupportedError


class TestModicaMortola:
    def test_recovery_sequence_energy(self, right_half_line, well):
        omega = Domain.box(-1.0, 1.0, 2000)
        u = MinimizeService.recovery_sequence(right_half_line, 0.02, well, omega)
        breakdown = EnergyService.modica_mortola(u, omega, 0.02, well)
        assert well.interface_constant == pytest.approx(4 / 3)
        assert breakdown.total == pytest.approx(well.interface_constant, rel=1e-2)
        # equipartition along the optimal profile
        assert breakdown.kinetic == pytest.approx(breakdown.potential, rel=5e-2)

    def test_gradient_is_directional_derivative(self, rng, well):
        omega = Domain.box((0.0, 0.0), (1.0, 1.0), 12)
        u = ScalarField(rng.uniform(-0.8, 0.8, (12, 12)), omega, exterior=Box((0.0, 0.0), (0.5, 1.0)))
        direction = rng.normal(size=(12, 12))
        grad = EnergyService.mm_gradient(u, 0.1, well)
        t = 1e-6
        plus = EnergyService.modica_mortola(u.with_values(u.values + t * direction), None, 0.1, well).total
        minus = EnergyService.modica_mortola(u.with_values(u.values - t * direction), None, 0.1, well).total
        assert float(np.dot(grad, direction.ravel())) == pytest.approx((plus - minus) / (2 * t), rel=1e-5)

    def test_rejects_nonpositive_eps(self, interval):
        with pytest.raises(InvalidInputError):
            EnergyService.modica_mortola(ScalarField(np.zeros(256), interval), interval, 0.0)

    @pytest.mark.parametrize("level", [-1.0, 1.0])
    def test_pure_phase_costs_nothing(self, interval, right_half_line, level):
        u = ScalarField(np.full(256, level), interval, exterior=right_half_line)
        assert EnergyService.modica_mortola(u, interval, 0.1).total == 0.0

    def test_zero_field_is_pure_potential(self, interval, right_half_line, well):
        u = ScalarField(np.zeros(256), interval, exterior=right_half_line)
        breakdown = EnergyService.modica_mortola(u, interval, 0.1, well)
        # (1/ε) W(0) |Ω| with the datum jumping to ±1 across ∂Ω
        assert breakdown.kinetic == 0.0
        assert breakdown.total == pytest.approx(float(well.value(0.0)) * 2.0 / 0.1)

    def test_gradient_ignores_the_datum(self, interval, right_half_line, rng):
        values = rng.uniform(-0.5, 0.5, 256)
        with_datum = ScalarField(values, interval, exterior=right_half_line)
        without = ScalarField(values, interval)
        assert np.array_equal(EnergyService.mm_gradient(with_datum, 0.1, QuarticWell()),
                              EnergyService.mm_gradient(without, 0.1, QuarticWell()))


class TestScaledNonlocal:
    def test_indicator_energy_is_eight_times_perimeter(self, interval, right_half_line):
        u = GeometryService.voxelize(right_half_line, interval)
        breakdown = EnergyService.scaled_nonlocal(u, interval, 0.1, 0.25, Part.FULL)
        per = KernelService.frac_perimeter(right_half_line, interval, 0.25, Part.FULL)
        assert breakdown.potential == 0.0
        assert breakdown.total == pytest.approx(8 * per, rel=1e-9)

    def test_full_carries_two_potential_copies(self, interval):
        u = ScalarField(np.zeros(256), interval, exterior=0.0)
        full = EnergyService.scaled_nonlocal(u, interval, 0.25, 0.25, Part.FULL)
        interior = EnergyService.scaled_nonlocal(u, interval, 0.25, 0.25, Part.INTERIOR)
        assert full.components["W_integral"] == pytest.approx(0.5)
        assert full.components["potential_weight"] == pytest.approx(1.0)
        assert full.kinetic == pytest.approx(0.0, abs=1e-14)
        assert full.potential == pytest.approx(1.0)
        assert interior.potential == pytest.approx(0.5)

    def test_regime_weights_above_one_half(self, interval, right_half_line):
        u = MinimizeService.recovery_sequence(right_half_line, 0.2, domain=interval)
        eps, s = 0.2, 0.75
        breakdown = EnergyService.scaled_nonlocal(u, interval, eps, s, Part.FULL)
        c = breakdown.components
        assert c["kinetic_weight"] == pytest.approx(eps ** (2 * s - 1))
        assert breakdown.kinetic == pytest.approx(c["kinetic_weight"] * (c["K_int"] + c["K_ext"]))

    def test_one_half_needs_eps_below_one(self, interval):
        u = ScalarField(np.zeros(256), interval, exterior=0.0)
        with pytest.raises(InvalidInputError):
            EnergyService.scaled_nonlocal(u, interval, 1.5, 0.5, Part.FULL)

    def test_j_eps_s(self, interval, right_half_line):
        u = GeometryService.voxelize(right_half_line, interval)
        value = EnergyService.j_eps_s(u, interval, 0.1, 0.25, 0.5)
        c = value.components
        assert value.total == pytest.approx(c["K_int"] + 0.5 * c["K_ext"])

    @pytest.mark.parametrize("eps, s, sigma", [(0.1, 0.5, 0.0), (0.1, 0.75, 0.0), (0.1, 0.25, 1.5),
                                               (0.0, 0.25, 0.0), (-0.1, 0.25, 0.0)])
    def test_j_eps_s_rejects(self, interval, eps, s, sigma):
        u = ScalarField(np.zeros(256), interval, exterior=0.0)
        with pytest.raises(InvalidInputError):
            EnergyService.j_eps_s(u, interval, eps, s, sigma)

    def test_j_raw_without_datum_is_interior_only(self, interval):
        u = ScalarField(np.linspace(-1, 1, 256), interval)
        value = EnergyService.j_raw(u, interval, 0.5, 0.25)
        assert value.components["K_ext"] == 0.0
        assert value.kinetic == pytest.approx(0.5 ** 0.5 * value.components["K_int"])


class TestSharpInterfaceFunctionals:
    def test_local_capillarity(self, unit_square, left_half_square):
        value = EnergyService.capillarity(left_half_square, unit_square, 0.5, CapillarityKind.LOCAL)
        assert value == pytest.approx(1.0 + 0.5 * 2.0, rel=1e-9)

    def test_capillarity_sigma_range(self, unit_square, left_half_square):
        with pytest.raises(InvalidInputError):
            EnergyService.capillarity(left_half_square, unit_square, -1.5, CapillarityKind.LOCAL)

    @pytest.mark.parametrize("sigma, c", [(0.5, 0.0), (-0.3, 0.25), (1.0, 1.0)])
    def test_g_sharp(self, unit_square, left_half_square, sigma, c):
        value = EnergyService.g_sharp(left_half_square, unit_square, sigma, c)
        assert value == pytest.approx(1.0 + 2 * sigma + 2 * c, rel=1e-9)

    def test_g_sharp_needs_two_dimensions(self, interval, right_half_line):
        with pytest.raises(InvalidInputError):
            EnergyService.g_sharp(right_half_line, interval, 0.5, 0.0)

    def test_line_tension_with_matching_boundary_datum(self, unit_square, left_half_square):
        u = GeometryService.voxelize(left_half_square, unit_square)
        facets = GeometryService.boundary_facets(unit_square)
        v = BoundaryField(facets.trace(u.values), facets)
        assert EnergyService.phi_line_tension(u, v, unit_square, 0.5, 0.3) == pytest.approx(1.0 + 2 * 0.3)

    def test_line_tension_counts_trace_mismatch(self, unit_square, left_half_square, well):
        u = GeometryService.voxelize(left_half_square, unit_square)
        facets = GeometryService.boundary_facets(unit_square)
        v = BoundaryField(np.full(len(facets), -1.0), facets)
        # wetted boundary: left side plus half of top and bottom
        expected = 1.0 + 0.5 * well.interface_constant * 2.0
        assert EnergyService.phi_line_tension(u, v, unit_square, 0.5, 0.0) == pytest.approx(expected)

    def test_line_tension_rejects_diffuse_field(self, unit_square):
        u = ScalarField(np.zeros(unit_square.cells), unit_square)
        facets = GeometryService.boundary_facets(unit_square)
        v = BoundaryField(np.ones(len(facets)), facets)
        with pytest.raises(InvalidInputError):
            EnergyService.phi_line_tension(u, v, unit_square, 0.5, 0.0)


class TestBoundaryModica:
    def test_zero_boundary_potential_reduces_to_mm(self, interval, right_half_line, well):
        u = MinimizeService.recovery_sequence(right_half_line, 0.05, well, interval)
        mm = EnergyService.modica_mortola(u, interval, 0.05, well)
        boundary = EnergyService.boundary_modica(u, interval, 0.05)
        assert boundary.total == pytest.approx(mm.total)
        assert boundary.boundary == 0.0

    def test_boundary_term(self, interval):
        u = ScalarField(np.zeros(256), interval)
        value = EnergyService.boundary_modica(u, interval, 0.1, QuarticWell(), lam=3.0)
        assert value.boundary == pytest.approx(3.0 * 2 * 0.25)

    def test_three_dimensions_unsupported(self):
        omega = Domain.box((0.0,) * 3, (1.0,) * 3, 4)
        with pytest.raises(UnsupportedError):
            EnergyService.boundary_modica(ScalarField(np.zeros((4, 4, 4)), omega), omega, 0.1)


class TestAbsOneDimensional:
    def test_limit_counts_jumps(self):
        omega = Domain.box(-1.0, 1.0, 8)
        v = ScalarField(np.array([-1, -1, 1, 1, 1, -1, -1, -1], dtype=float), omega)
        assert EnergyService.abs_1d_limit(v, k=1.0) == pytest.approx(16.0)
        assert EnergyService.abs_1d_limit(v, k=1.5) == pytest.approx(24.0)

    def test_limit_needs_pure_phases(self):
        omega = Domain.box(-1.0, 1.0, 4)
        with pytest.raises(InvalidInputError):
            EnergyService.abs_1d_limit(ScalarField(np.array([-1.0, 0.5, 1.0, 1.0]), omega))

    def test_energy_uses_exponential_schedule(self, interval, right_half_line):
        u = MinimizeService.recovery_sequence(right_half_line, 0.1, domain=interval)
        value = EnergyService.abs_1d(u, interval, 0.5, k=0.5)
        assert value.components["lambda"] == pytest.approx(np.e)
        assert value.kinetic == pytest.approx(0.5 * value.components["K_int"])

    def test_energy_rejects(self, interval, unit_square):
        with pytest.raises(InvalidInputError):
            EnergyService.abs_1d(ScalarField(np.zeros(256), interval), interval, 0.1, s=0.25)
        with pytest.raises(InvalidInputError):
            EnergyService.abs_1d(ScalarField(np.zeros((32, 32)), unit_square), unit_square, 0.1)


class TestEvaluate:
    def test_dispatches_by_tag(self, interval, right_half_line):
        u = MinimizeService.recovery_sequence(right_half_line, 0.1, domain=interval)
        spec = EnergySpec(tag=EnergyTag.MM, eps=0.1)
        assert EnergyService.evaluate(spec, u).total == EnergyService.modica_mortola(u, None, 0.1).total
        spec = EnergySpec(tag=EnergyTag.F_INT, eps=0.1, s=0.3)
        assert EnergyService.evaluate(spec, u).tag == "F_int"

    @pytest.mark.parametrize("tag", [EnergyTag.G_SHARP, EnergyTag.CAPILLARY_LOCAL, EnergyTag.PHI_LINE])
    def test_set_functionals_are_rejected(self, interval, tag):
        with pytest.raises(InvalidInputError):
            EnergyService.evaluate(EnergySpec(tag=tag), ScalarField(np.zeros(256), interval))

    def test_boundary_schedule(self, interval):
        spec = EnergySpec(tag=EnergyTag.BOUNDARY_MODICA, eps=0.1, schedule=LambdaSchedule.LOGARITHMIC,
                          boundary_well=QuarticWell())
        u = ScalarField(np.zeros(256), interval)
        value = EnergyService.evaluate(spec, u)
        assert value.boundary == pytest.approx(spec.lambda_eps() * 2 * 0.25)


class TestOptimalProfile:
    def test_quartic_profile_is_tanh(self, well):
        profile = PotentialService.optimal_profile(well)
        t = np.linspace(-6.0, 6.0, 121)
        assert np.max(np.abs(profile(t) - np.tanh(t / 2))) < 1e-6
        assert profile.inverse(0.0) == pytest.approx(0.0, abs=1e-6)
        assert profile(100.0) == 1.0 and profile(-100.0) == -1.0

    def test_profile_energy_is_interface_constant(self, well):
        profile = PotentialService.optimal_profile(well)
        assert profile.energy() == pytest.approx(well.interface_constant, rel=1e-4)

    def test_unit_well_profile(self):
        w = QuarticWell(zeros=(0.0, 1.0), scale=1.0)
        profile = PotentialService.optimal_profile(w)
        assert profile(0.0) == pytest.approx(0.5)
        assert w.interface_constant == pytest.approx(1.0 / 3.0)

    def test_degenerate_well_is_unsupported(self):
        w = CallableWell(lambda t: (1 - t * t) ** 6, lambda t: -12 * t * (1 - t * t) ** 5, (-1.0, 1.0))
        with pytest.raises(UnsupportedError):
            PotentialService.optimal_profile(w)

    def test_potential_eval(self, well):
        assert PotentialService.potential_eval(well, 0.0) == pytest.approx(0.25)
        assert PotentialService.potential_eval(well, 0.5, PotentialKind.DERIVATIVE) == pytest.approx(
            2 * 0.25 * (0.5 + 1) * (0.5 - 1) * 1.0)
        assert PotentialService.potential_eval(well, 1.0, PotentialKind.PRIMITIVE) == pytest.approx(4 / 3)

    def test_generic_primitive_matches_closed_form(self, well):
        generic = CallableWell(well.value, well.derivative, well.zeros)
        assert generic.primitive(0.3) == pytest.approx(well.primitive(0.3), rel=1e-9)
